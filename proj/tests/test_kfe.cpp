#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "fixture.hpp"
#include "oracles.hpp"
#include "twinpeaks/kfe.hpp"

using namespace twinpeaks;
using doctest::Approx;

namespace {

oracle::Dense to_dense(const Tridiagonal& t) {
  const std::size_t n = t.size();
  oracle::Dense d = oracle::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) d[i][i - 1] = t.sub[i];
    d[i][i] = t.diag[i];
    if (i + 1 < n) d[i][i + 1] = t.sup[i];
  }
  return d;
}

SparseMatrix to_sparse(const Tridiagonal& t) {
  const std::size_t n = t.size();
  std::vector<Eigen::Triplet<double>> e;
  for (std::size_t i = 0; i < n; ++i) {
    const int r = static_cast<int>(i);
    if (i > 0) e.emplace_back(r, r - 1, t.sub[i]);
    e.emplace_back(r, r, t.diag[i]);
    if (i + 1 < n) e.emplace_back(r, r + 1, t.sup[i]);
  }
  SparseMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setFromTriplets(e.begin(), e.end());
  return m;
}

std::size_t structural_nonzeros_in_column(const SparseMatrix& S, int col) {
  std::size_t n = 0;
  for (SparseMatrix::InnerIterator it(S, col); it; ++it) n += it.value() != 0.0 ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("transpose_generator equals the dense transpose on a 4x4 toy") {
  const Vector mu{0.3, -0.1, 0.2, -0.4};
  const double sigma = 0.2, dk = 0.5;
  const auto coeffs = assemble_coeffs(mu, sigma, dk);
  const auto want = oracle::transpose(oracle::hjb_generator(mu, sigma, dk));
  const auto got = to_dense(transpose_generator(coeffs));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(got[i][j] == Approx(want[i][j]).epsilon(1e-15));
  }
}

TEST_CASE("pure diffusion: transposed generator is symmetric inside, columns sum to zero") {
  const Vector mu(8, 0.0);
  const auto coeffs = assemble_coeffs(mu, 0.3, 0.1);
  const auto L = to_dense(generator_matrix(coeffs));
  const auto LT = to_dense(transpose_generator(coeffs));
  for (std::size_t i = 1; i + 1 < 8; ++i) {
    for (std::size_t j = 0; j < 8; ++j) CHECK(LT[i][j] == Approx(L[i][j]));
  }
  for (std::size_t j = 0; j < 8; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 8; ++i) s += LT[i][j];
    CHECK(std::abs(s) < 1e-12);
  }
}

TEST_CASE("pure diffusion with reflecting ends has a uniform stationary density") {
  const std::size_t n = 41;
  const double dk = 0.25;
  const auto coeffs = assemble_coeffs(Vector(n, 0.0), 0.3, dk);
  const Eigen::VectorXd g = solve_normalized(to_sparse(transpose_generator(coeffs)), dk);
  for (Eigen::Index i = 0; i < g.size(); ++i) CHECK(g[i] == Approx(1.0 / (n * dk)).epsilon(1e-10));
}

TEST_CASE("build_transfer weights") {
  Calibration cal;
  cal.k_min = 1.0;
  cal.k_max = 11.0;
  cal.N = 11;
  cal.phi = 3.0;
  const Grid grid(cal);
  Mask flags(grid.size(), 0);
  flags[7] = flags[9] = 1;
  const auto region = make_signal_region(flags, grid);

  const auto on = build_transfer(region, cal, grid);
  CHECK(structural_nonzeros_in_column(on.S, 7) == 1);
  CHECK(on.S.coeff(4, 7) == cal.lambda_bar);
  CHECK(on.S.coeff(6, 9) == cal.lambda_bar);
  CHECK(structural_nonzeros_in_column(on.S, 3) == 0);

  cal.phi = 2.5;
  const auto mid = build_transfer(region, cal, grid);
  CHECK(mid.S.coeff(4, 7) == Approx(cal.lambda_bar / 2));
  CHECK(mid.S.coeff(5, 7) == Approx(cal.lambda_bar / 2));
  CHECK(mid.clipped == 0);

  cal.phi = 8.5;  // node 7 (k = 8) lands below k_1
  const auto clip = build_transfer(region, cal, grid);
  CHECK(clip.clipped == 1);
  CHECK(clip.S.coeff(0, 7) == cal.lambda_bar);
}

TEST_CASE("decoupled limit gives a block-diagonal system") {
  Calibration cal;
  cal.N = 64;
  cal.lambda_LH = 0.0;
  cal.lambda_HL = 0.0;
  const Grid grid(cal);
  const auto coeffs = assemble_coeffs(Vector(grid.size(), 0.01), cal, grid);
  const auto LT = transpose_generator(coeffs);
  const auto region = make_signal_region(Mask(grid.size(), 0), grid);
  const auto sys = assemble_kfe(LT, LT, LT, build_transfer(region, cal, grid), region, cal);
  const auto n = static_cast<Eigen::Index>(grid.size());
  for (int col = 0; col < sys.M.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(sys.M, col); it; ++it) {
      if (it.value() != 0.0) CHECK(it.row() / n == it.col() / n);
    }
  }
}

TEST_CASE("baseline system: drain on the W diagonal and column conservation") {
  const auto& b = fixture::baseline();
  const auto n = static_cast<Eigen::Index>(b.sol.grid.size());
  REQUIRE_FALSE(b.sol.signal.empty());
  const std::size_t i = *b.sol.signal.kstar_index;
  const auto ii = static_cast<Eigen::Index>(i);
  CHECK(b.kfe.M.coeff(n + ii, n + ii) == Approx(b.sol.coeffs[Regime::W].z[i] - 1000.0));
  CHECK(b.kfe.M.coeff(ii, n + ii) == 0.0);  // no W -> L flow from signaling nodes
  const std::size_t j = i - 5;
  const auto jj = static_cast<Eigen::Index>(j);
  CHECK(b.kfe.M.coeff(jj, n + jj) == Approx(b.sol.cal.lambda_HL));
  CHECK(b.kfe.max_column_sum < 1e-10);
}

TEST_CASE("assemble_kfe refuses a non-conserving system") {
  Calibration cal;
  cal.N = 16;
  const Grid grid(cal);
  const auto coeffs = assemble_coeffs(Vector(grid.size(), 0.0), cal, grid);
  auto broken = transpose_generator(coeffs);
  broken.diag[3] += 0.5;
  const auto region = make_signal_region(Mask(grid.size(), 0), grid);
  const auto ok = transpose_generator(coeffs);
  CHECK_THROWS_AS(assemble_kfe(ok, broken, ok, build_transfer(region, cal, grid), region, cal), std::runtime_error);
}

TEST_CASE("limiting shares") {
  Calibration cal;
  auto [pl, ph] = limiting_shares(cal);
  CHECK(pl == Approx(2.0 / 7.0));
  CHECK(ph == Approx(5.0 / 7.0));
  cal.lambda_LH = cal.lambda_HL = 0.01;
  std::tie(pl, ph) = limiting_shares(cal);
  CHECK(pl == Approx(0.5));
  CHECK(ph == Approx(0.5));
  cal.lambda_LH = cal.lambda_HL = 0.0;
  CHECK_THROWS_AS(limiting_shares(cal), std::domain_error);
}

TEST_CASE("baseline: delay raises low-side mass above the instantaneous benchmark") {
  const auto& b = fixture::baseline();
  const double dk = b.sol.grid.dk();
  CHECK(b.density.share(Regime::L, dk) + b.density.share(Regime::W, dk) >= 2.0 / 7.0 - 0.02);
}
