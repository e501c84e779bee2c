#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fixture.hpp"
#include "oracles.hpp"
#include "twinpeaks/diagnostics.hpp"
#include "twinpeaks/hjb.hpp"

using namespace twinpeaks;
using doctest::Approx;

namespace {

// Five nodes at k = 1..5, dk = 1.
Calibration toy_cal() {
  Calibration cal;
  cal.k_min = 1.0;
  cal.k_max = 5.0;
  cal.N = 5;
  cal.phi = 2.0;
  return cal;
}

}  // namespace

TEST_CASE("upwind: affine V with the zero-drift slope picks the zero-drift branch") {
  // k = 4, alpha = 1/2, delta = 1/4: f - delta k = 1, so u'(c) = 1 and every step is exact.
  Calibration cal;
  cal.alpha = 0.5;
  cal.delta = 0.25;
  const Grid grid(1.0, 5.0, 5);
  const Vector V{-3.0, -2.0, -1.0, 0.0, 1.0};
  const auto u = upwind_slope(V, 3, Regime::L, cal, grid);
  CHECK(u.kind == UpwindCase::zero_drift);
  CHECK(u.c == 1.0);
  CHECK(u.mu == 0.0);
  CHECK(u.slope == 1.0);

  // On the baseline grid the same construction leaves only rounding-level drift.
  const Calibration base;
  const Grid g(base);
  const std::size_t i = 200;
  const double c0 = zero_drift_consumption(g[i], Regime::L, base);
  Vector W(g.size());
  for (std::size_t j = 0; j < W.size(); ++j) W[j] = std::pow(c0, -base.gamma) * (g[j] - g[i]);
  const auto w = upwind_slope(W, i, Regime::L, base, g);
  CHECK(w.c == Approx(c0).epsilon(1e-12));
  CHECK(std::abs(w.mu) < 1e-12);
}

TEST_CASE("upwind: last node never drifts up") {
  const Calibration cal;
  const Grid grid(cal);
  Vector V(grid.size());
  for (std::size_t j = 0; j < V.size(); ++j) V[j] = 100.0 * grid[j];  // steep: consumption tiny
  const auto pol = extract_policy(V, Regime::H, cal, grid);
  CHECK(pol.mu.back() == 0.0);
  CHECK(pol.c.back() == Approx(oracle::kZeroDriftConsumptionH50).epsilon(1e-13));

  const auto u = upwind_slope(V, grid.size() - 1, Regime::H, cal, grid);
  CHECK(u.kind != UpwindCase::forward);
}

TEST_CASE("upwind: toy concave vector, hand-evaluated") {
  const Calibration cal = toy_cal();
  const Grid grid(cal);
  REQUIRE(grid.dk() == 1.0);

  // Steep left slope: forward difference at k = 2 implies positive drift.
  const Vector V{-10.0, -4.0, -2.5, -2.0, -1.8};
  const double vf = (V[2] - V[1]) / 1.0;
  const double cf = std::pow(vf, -1.0 / cal.gamma);
  const double muf = std::pow(2.0, cal.alpha) - cf - cal.delta * 2.0;
  REQUIRE(muf > 0.0);
  const auto u = upwind_slope(V, 1, Regime::L, cal, grid);
  CHECK(u.kind == UpwindCase::forward);
  CHECK(u.slope == Approx(vf));
  CHECK(u.c == Approx(cf).epsilon(1e-14));
  CHECK(u.mu == Approx(muf).epsilon(1e-14));

  // Flat right part: both differences imply dissaving, backward wins.
  const Vector F{-3.0, -2.0, -1.94, -1.89, -1.85};
  const double vb = F[2] - F[1];
  const double cb = std::pow(vb, -1.0 / cal.gamma);
  const double mub = std::pow(3.0, cal.alpha) - cb - cal.delta * 3.0;
  REQUIRE(mub < 0.0);
  const auto w = upwind_slope(F, 2, Regime::L, cal, grid);
  CHECK(w.kind == UpwindCase::backward);
  CHECK(w.c == Approx(cb).epsilon(1e-14));
  CHECK(w.mu == Approx(mub).epsilon(1e-14));

  // First node only forms a forward difference; a decreasing V there falls to zero drift.
  const Vector D{-1.0, -2.0, -3.0, -4.0, -5.0};
  const auto z = upwind_slope(D, 0, Regime::L, cal, grid);
  CHECK(z.kind == UpwindCase::zero_drift);
  CHECK(z.c == Approx(zero_drift_consumption(1.0, Regime::L, cal)));
}

TEST_CASE("assemble_coeffs examples") {
  const double sigma = 0.3, dk = 0.1;
  const Vector mu{0.0, 0.0, 0.0, 0.0};
  const auto c = assemble_coeffs(mu, sigma, dk);
  const double d = sigma * sigma / (2.0 * dk * dk);
  CHECK(c.x[1] == Approx(d));
  CHECK(c.y[1] == Approx(d));
  CHECK(c.z[1] == Approx(-2.0 * d));
  CHECK(c.y[0] == 0.0);
  CHECK(c.x[3] == 0.0);
  CHECK(c.z[0] == -c.x[0]);
  CHECK(c.z[3] == -c.y[3]);

  const Vector adv{dk, dk, dk};
  const auto a = assemble_coeffs(adv, 0.0, dk);
  CHECK(a.x[1] == Approx(1.0));
  CHECK(a.y[1] == 0.0);
  CHECK(a.z[1] == Approx(-1.0));
}

TEST_CASE("implicit_update matches a dense solve on random admissible 5x5 systems") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Calibration cal;
  for (int trial = 0; trial < 20; ++trial) {
    const double dk = 0.05 + 0.5 * std::abs(U(rng));
    const double sigma = 0.05 + std::abs(U(rng));
    Vector mu(5), V_prev(5), u_vec(5), inflow(5);
    for (std::size_t i = 0; i < 5; ++i) {
      mu[i] = U(rng);
      V_prev[i] = -10.0 + U(rng);
      u_vec[i] = -1.0 + 0.5 * U(rng);
      inflow[i] = 0.01 * U(rng);
    }
    const double lambda_out = 0.01 * std::abs(U(rng));
    const double dt = 1.0 + 100.0 * std::abs(U(rng));
    const auto coeffs = assemble_coeffs(mu, sigma, dk);
    const Vector got = implicit_update(V_prev, coeffs, u_vec, lambda_out, inflow, cal, dt);

    auto A = oracle::hjb_generator(mu, sigma, dk);
    std::vector<double> b(5);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) A[i][j] = -A[i][j];
      A[i][i] += 1.0 / dt + cal.rho + lambda_out;
      b[i] = V_prev[i] / dt + u_vec[i] + inflow[i];
    }
    const auto want = oracle::dense_solve(A, b);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-12 * (1.0 + std::abs(want[i])));
    CHECK(is_m_matrix(implicit_system(coeffs, cal.rho, lambda_out, dt)));
  }
}

TEST_CASE("implicit_update with a huge step reaches u / rho") {
  const Calibration cal;
  const Vector mu(6, 0.0), V0(6, 0.0), inflow(6, 0.0);
  const Vector u{-1.0, -0.8, -0.6, -0.5, -0.45, -0.4};
  const auto coeffs = assemble_coeffs(mu, 0.0, 0.1);
  const Vector V = implicit_update(V0, coeffs, u, 0.0, inflow, cal, 1e12);
  for (std::size_t i = 0; i < 6; ++i) CHECK(V[i] == Approx(u[i] / cal.rho).epsilon(1e-9));
}

TEST_CASE("M-matrix audit") {
  const auto coeffs = assemble_coeffs(Vector{0.1, -0.2, 0.3}, 0.3, 0.1);
  CHECK(is_m_matrix(implicit_system(coeffs, 0.05, 0.0, 500.0)));
  Tridiagonal bad = implicit_system(coeffs, 0.05, 0.0, 500.0);
  bad.sup[0] = 0.5;
  CHECK_FALSE(is_m_matrix(bad));
  Tridiagonal neg = implicit_system(coeffs, 0.05, 0.0, 500.0);
  neg.diag[1] = -1.0;
  CHECK_FALSE(is_m_matrix(neg));
}

TEST_CASE("tridiagonal Thomas solve against dense elimination") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const std::size_t n = 9;
  Tridiagonal t(n);
  oracle::Dense A = oracle::zeros(n);
  std::vector<double> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.sub[i] = i > 0 ? -std::abs(U(rng)) : 0.0;
    t.sup[i] = i + 1 < n ? -std::abs(U(rng)) : 0.0;
    t.diag[i] = 2.5 + std::abs(U(rng));
    if (i > 0) A[i][i - 1] = t.sub[i];
    if (i + 1 < n) A[i][i + 1] = t.sup[i];
    A[i][i] = t.diag[i];
    b[i] = U(rng);
  }
  const auto got = t.solve(b);
  const auto want = oracle::dense_solve(A, b);
  for (std::size_t i = 0; i < n; ++i) CHECK(got[i] == Approx(want[i]).epsilon(1e-13));
  const auto back = t.multiply(got);
  for (std::size_t i = 0; i < n; ++i) CHECK(back[i] == Approx(b[i]).epsilon(1e-12));

  Tridiagonal z(3);
  CHECK_THROWS_AS(z.solve(std::vector<double>{1.0, 1.0, 1.0}), std::runtime_error);
}

TEST_CASE("interp_linear") {
  const Grid grid(1.0, 5.0, 5);
  const Vector v{2.0, 4.0, 6.0, 8.0, 10.0};
  CHECK(interp_linear(v, 3.0, grid) == 6.0);
  CHECK(interp_linear(v, 2.5, grid) == Approx(5.0));
  bool clipped = false;
  CHECK(interp_linear(v, 0.5, grid, &clipped) == 2.0);
  CHECK(clipped);
  clipped = false;
  CHECK(interp_linear(v, 9.0, grid, &clipped) == 10.0);
  CHECK(clipped);
  CHECK_THROWS(interp_linear(v, std::numeric_limits<double>::quiet_NaN(), grid));
  const Vector holes{1.0, std::numeric_limits<double>::quiet_NaN(), 3.0, 4.0, 5.0};
  CHECK_THROWS(interp_linear(holes, 1.5, grid));
}

TEST_CASE("american_projection examples") {
  Calibration cal;
  const Grid below(0.01, 8.0, 41);  // every node under phi = 9
  const Vector a(41, 0.0), b(41, 1.0);
  const auto none = american_projection(a, b, cal, below);
  CHECK(none.region.empty());
  CHECK(std::isinf(none.region.kstar));
  CHECK(none.V_W == a);

  const Grid grid(cal);
  const Vector W0(grid.size(), 0.0), H1(grid.size(), 1.0);
  const auto all = american_projection(W0, H1, cal, grid);
  const std::size_t first = grid.first_at_or_above(cal.phi);
  REQUIRE(all.region.kstar_index.has_value());
  CHECK(*all.region.kstar_index == first);
  CHECK(all.region.kstar == grid[first]);
  CHECK(all.region.count() == grid.size() - first);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(all.region.flags[i] == (i >= first ? 1 : 0));
    CHECK(all.V_W[i] == (i >= first ? 1.0 : 0.0));
  }
}

TEST_CASE("recompute_w_policy") {
  Calibration cal;
  cal.k_min = 1.0;
  cal.k_max = 11.0;
  cal.N = 11;
  cal.phi = 3.0;
  const Grid grid(cal);
  Vector V(grid.size());
  for (std::size_t i = 0; i < V.size(); ++i) V[i] = -1.0 / std::sqrt(grid[i]);
  Vector c_H(grid.size()), mu_H(grid.size());
  for (std::size_t i = 0; i < V.size(); ++i) {
    c_H[i] = 0.5 + 0.01 * static_cast<double>(i);
    mu_H[i] = 0.2 - 0.03 * static_cast<double>(i);
  }

  const SignalRegion empty = make_signal_region(Mask(grid.size(), 0), grid);
  const auto plain = recompute_w_policy(V, c_H, mu_H, empty, cal, grid);
  const auto ref = extract_policy(V, Regime::W, cal, grid);
  CHECK(plain.c == ref.c);
  CHECK(plain.mu == ref.mu);

  Mask flags(grid.size(), 0);
  for (std::size_t i = 6; i < grid.size(); ++i) flags[i] = 1;
  const SignalRegion region = make_signal_region(flags, grid);
  const auto wp = recompute_w_policy(V, c_H, mu_H, region, cal, grid);
  for (std::size_t i = 6; i < grid.size(); ++i) {
    CHECK(wp.c[i] == c_H[i - 3]);
    CHECK(wp.mu[i] == mu_H[i - 3]);
  }
  for (std::size_t i = 0; i < 6; ++i) CHECK(wp.c[i] == ref.c[i]);
}

TEST_CASE("exercise payoff and surplus are undefined below phi") {
  const auto& b = fixture::baseline();
  const auto payoff = exercise_payoff(b.sol.V[Regime::H], b.sol.cal, b.sol.grid);
  const auto D = surplus(b.sol.V, b.sol.cal, b.sol.grid);
  for (std::size_t i = 0; i < b.sol.grid.size(); ++i) {
    if (b.sol.grid[i] < b.sol.cal.phi) {
      CHECK(std::isnan(payoff[i]));
      CHECK(std::isnan(D[i]));
    } else {
      CHECK(D[i] == Approx(b.sol.V[Regime::W][i] - payoff[i]));
    }
  }
}

TEST_CASE("vanishing noise and no switching recovers the deterministic steady state") {
  Calibration cal;
  cal.sigma = 0.01;
  cal.lambda_LH = 0.0;
  cal.lambda_HL = 0.0;
  const auto sol = solve_hjb(cal);
  REQUIRE(sol.report.converged);
  const Grid& grid = sol.grid;
  for (Regime r : {Regime::L, Regime::H}) {
    const auto roots = find_attractors(sol.policy.mu[r], grid);
    REQUIRE(roots.size() == 1);
    CHECK(std::abs(roots[0] - deterministic_steady_state(r, cal)) <= grid.dk());
  }
}

TEST_CASE("projection mode also converges on the baseline") {
  Calibration cal;
  cal.w_step = WStepMode::projection;
  const auto sol = solve_hjb(cal);
  CHECK(sol.report.converged);
  CHECK_FALSE(sol.signal.empty());
  CHECK(sol.report.w_step == WStepMode::projection);
}

TEST_CASE("iteration cap yields a non-converged report with outputs kept") {
  Calibration cal;
  cal.max_iter = 2;
  const auto sol = solve_hjb(cal);
  CHECK_FALSE(sol.report.converged);
  CHECK(sol.report.iterations == 2);
  CHECK(sol.report.errors.size() == 2);
  CHECK(sol.V[Regime::L].size() == static_cast<std::size_t>(cal.N));
}
