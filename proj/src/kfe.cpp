#include "twinpeaks/kfe.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/SparseLU>

namespace twinpeaks {

namespace {

using Triplet = Eigen::Triplet<double>;

void add_tridiagonal(std::vector<Triplet>& out, const Tridiagonal& t, std::size_t offset) {
  const std::size_t n = t.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<int>(offset + i);
    if (i > 0) out.emplace_back(r, r - 1, t.sub[i]);
    out.emplace_back(r, r, t.diag[i]);
    if (i + 1 < n) out.emplace_back(r, r + 1, t.sup[i]);
  }
}

void add_diagonal(std::vector<Triplet>& out, std::size_t row_offset, std::size_t col_offset, std::size_t n,
                  double value, const Mask* only, bool flagged) {
  for (std::size_t i = 0; i < n; ++i) {
    if (only && (((*only)[i] != 0) != flagged)) continue;
    if (value == 0.0) continue;
    out.emplace_back(static_cast<int>(row_offset + i), static_cast<int>(col_offset + i), value);
  }
}

}  // namespace

Tridiagonal transpose_generator(const UpwindCoeffs& coeffs) {
  const std::size_t n = coeffs.z.size();
  Tridiagonal t(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.sub[i] = i > 0 ? coeffs.x[i - 1] : 0.0;
    t.diag[i] = coeffs.z[i];
    t.sup[i] = i + 1 < n ? coeffs.y[i + 1] : 0.0;
  }
  return t;
}

TransferMatrix build_transfer(const SignalRegion& region, const Calibration& cal, const Grid& grid) {
  const std::size_t n = grid.size();
  if (region.flags.size() != n) throw std::invalid_argument("build_transfer: signal flags differ from grid");
  TransferMatrix out;
  std::vector<Triplet> entries;
  for (std::size_t i = 0; i < n; ++i) {
    if (!region.flags[i]) continue;
    const Grid::Cell cell = grid.locate(grid[i] - cal.phi);
    out.clipped += cell.clipped ? 1 : 0;
    const auto col = static_cast<int>(i);
    if (cell.weight == 0.0) {
      entries.emplace_back(static_cast<int>(cell.lower), col, cal.lambda_bar);
    } else {
      const double hi = cal.lambda_bar * cell.weight;
      entries.emplace_back(static_cast<int>(cell.lower), col, cal.lambda_bar - hi);
      entries.emplace_back(static_cast<int>(cell.lower + 1), col, hi);
    }
  }
  out.S.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.S.setFromTriplets(entries.begin(), entries.end());
  return out;
}

KfeSystem assemble_kfe(const Tridiagonal& LT_L, const Tridiagonal& LT_W, const Tridiagonal& LT_H,
                       const TransferMatrix& transfer, const SignalRegion& region, const Calibration& cal) {
  const std::size_t n = LT_L.size();
  if (LT_W.size() != n || LT_H.size() != n || region.flags.size() != n ||
      static_cast<std::size_t>(transfer.S.cols()) != n) {
    throw std::invalid_argument("assemble_kfe: block sizes differ");
  }
  const std::size_t oL = 0, oW = n, oH = 2 * n;
  std::vector<Triplet> t;
  t.reserve(12 * n);

  // Row block L: own generator, departures to W, returns from the unexercised W and from H.
  add_tridiagonal(t, LT_L, oL);
  add_diagonal(t, oL, oL, n, -cal.lambda_LH, nullptr, false);
  add_diagonal(t, oL, oW, n, cal.lambda_HL, &region.flags, false);
  add_diagonal(t, oL, oH, n, cal.lambda_HL, nullptr, false);

  // Row block W: arrivals from L, obsolescence outside the signal region, drain inside it.
  add_diagonal(t, oW, oL, n, cal.lambda_LH, nullptr, false);
  add_tridiagonal(t, LT_W, oW);
  add_diagonal(t, oW, oW, n, -cal.lambda_HL, &region.flags, false);
  add_diagonal(t, oW, oW, n, -cal.lambda_bar, &region.flags, true);

  // Row block H: drained W mass relocated by phi, own generator, obsolescence.
  for (int col = 0; col < transfer.S.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(transfer.S, col); it; ++it) {
      t.emplace_back(static_cast<int>(oH + it.row()), static_cast<int>(oW + it.col()), it.value());
    }
  }
  add_tridiagonal(t, LT_H, oH);
  add_diagonal(t, oH, oH, n, -cal.lambda_HL, nullptr, false);

  KfeSystem sys;
  sys.n = n;
  sys.M.resize(static_cast<Eigen::Index>(3 * n), static_cast<Eigen::Index>(3 * n));
  sys.M.setFromTriplets(t.begin(), t.end());
  sys.M.makeCompressed();

  const Eigen::RowVectorXd sums = Eigen::RowVectorXd::Ones(sys.M.rows()) * sys.M;
  sys.max_column_sum = sums.cwiseAbs().maxCoeff();
  if (!(sys.max_column_sum <= 1e-8)) {
    throw std::runtime_error("KFE assembly does not conserve mass: max column sum " +
                             std::to_string(sys.max_column_sum));
  }
  return sys;
}

KfeSystem assemble_kfe(const HjbSolution& sol) {
  const TransferMatrix transfer = build_transfer(sol.signal, sol.cal, sol.grid);
  return assemble_kfe(transpose_generator(sol.coeffs[Regime::L]), transpose_generator(sol.coeffs[Regime::W]),
                      transpose_generator(sol.coeffs[Regime::H]), transfer, sol.signal, sol.cal);
}

Eigen::VectorXd solve_normalized(const SparseMatrix& M, double dk, int row) {
  const Eigen::Index size = M.rows();
  if (M.cols() != size || size == 0) throw std::invalid_argument("solve_normalized: matrix must be square");
  const Eigen::Index r = row < 0 ? size + row : row;
  if (r < 0 || r >= size) throw std::invalid_argument("solve_normalized: normalization row out of range");

  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(M.nonZeros() + size));
  for (int col = 0; col < M.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(M, col); it; ++it) {
      if (it.row() != r) t.emplace_back(static_cast<int>(it.row()), col, it.value());
    }
  }
  for (Eigen::Index col = 0; col < size; ++col) t.emplace_back(static_cast<int>(r), static_cast<int>(col), dk);
  SparseMatrix A(size, size);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();

  Eigen::VectorXd b = Eigen::VectorXd::Zero(size);
  b[r] = 1.0;

  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) {
    throw std::runtime_error("KFE system is singular: " + lu.lastErrorMessage());
  }
  Eigen::VectorXd g = lu.solve(b);
  if (lu.info() != Eigen::Success || !g.allFinite()) {
    throw std::runtime_error("KFE solve produced a non-finite density (singular system)");
  }
  const double residual = (A * g - b).lpNorm<Eigen::Infinity>();
  const double max_entry = Eigen::Map<const Eigen::VectorXd>(A.valuePtr(), A.nonZeros()).cwiseAbs().maxCoeff();
  const double scale = max_entry * g.lpNorm<Eigen::Infinity>() + 1.0;
  if (!(residual <= 1e-8 * scale)) {
    throw std::runtime_error("KFE system is ill-conditioned: residual " + std::to_string(residual));
  }
  return g;
}

Vector DensityTriple::total() const {
  Vector out(g[Regime::L].size(), 0.0);
  for (Regime r : kRegimes) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[r][i];
  }
  return out;
}

double DensityTriple::share(Regime r, double dk) const {
  double s = 0.0;
  for (double v : g[r]) s += v;
  return s * dk;
}

DensityTriple solve_stationary(const KfeSystem& system, const Grid& grid, int normalization_row) {
  const std::size_t n = system.n;
  if (n != grid.size()) throw std::invalid_argument("solve_stationary: system size differs from grid");
  const double dk = grid.dk();
  Eigen::VectorXd raw = solve_normalized(system.M, dk, normalization_row);

  DensityTriple out;
  out.max_negativity = std::min(0.0, raw.minCoeff());
  double clipped = 0.0;
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    if (raw[i] < 0.0) {
      clipped -= raw[i] * dk;
      raw[i] = 0.0;
    }
  }
  out.clipped_mass = clipped;
  if (clipped > 1e-8) {
    throw std::runtime_error("KFE density has significant negative mass (" + std::to_string(clipped) + ")");
  }
  const double mass = raw.sum() * dk;
  if (clipped > 0.0) raw /= mass;
  out.mass_error = std::abs(raw.sum() * dk - 1.0);
  for (Regime r : kRegimes) {
    const std::size_t off = static_cast<std::size_t>(r) * n;
    out.g[r].assign(raw.data() + off, raw.data() + off + n);
  }
  return out;
}

std::array<double, 3> block_residuals(const KfeSystem& system, const DensityTriple& density, double dk) {
  const std::size_t n = system.n;
  Eigen::VectorXd g(static_cast<Eigen::Index>(3 * n));
  for (Regime r : kRegimes) {
    const std::size_t off = static_cast<std::size_t>(r) * n;
    for (std::size_t i = 0; i < n; ++i) g[static_cast<Eigen::Index>(off + i)] = density.g[r][i];
  }
  const Eigen::VectorXd flow = dk * (system.M * g);
  std::array<double, 3> out{};
  for (std::size_t b = 0; b < 3; ++b) {
    out[b] = flow.segment(static_cast<Eigen::Index>(b * n), static_cast<Eigen::Index>(n)).lpNorm<Eigen::Infinity>();
  }
  return out;
}

std::pair<double, double> limiting_shares(const Calibration& cal) {
  const double total = cal.lambda_LH + cal.lambda_HL;
  if (!(total > 0.0)) throw std::domain_error("limiting shares undefined when both switching rates are zero");
  return {cal.lambda_HL / total, cal.lambda_LH / total};
}

}  // namespace twinpeaks
