#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "twinpeaks/calibration.hpp"
#include "twinpeaks/hjb.hpp"
#include "twinpeaks/model.hpp"

namespace twinpeaks {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Forward (adjoint) generator: row i holds x_{i-1}, z_i, y_{i+1}.
Tridiagonal transpose_generator(const UpwindCoeffs& coeffs);

/// Relocation of drained W mass: column i sends lambda_bar into the cell holding k_i - phi.
struct TransferMatrix {
  SparseMatrix S;
  /// Flagged columns whose target fell below k_1 (all weight placed on node 1).
  std::size_t clipped = 0;
};
TransferMatrix build_transfer(const SignalRegion& region, const Calibration& cal, const Grid& grid);

struct KfeSystem {
  /// 3N x 3N, blocks ordered (L, W, H), before the normalization row is imposed.
  SparseMatrix M;
  std::size_t n = 0;
  /// Largest |column sum| of M.
  double max_column_sum = 0.0;
};

/// Throws std::runtime_error if any column of the assembled matrix fails to sum to zero
/// within 1e-8.
KfeSystem assemble_kfe(const Tridiagonal& LT_L, const Tridiagonal& LT_W, const Tridiagonal& LT_H,
                       const TransferMatrix& transfer, const SignalRegion& region, const Calibration& cal);
/// Convenience overload using the generators stored in a converged solve.
KfeSystem assemble_kfe(const HjbSolution& sol);

/// Solves M g = e_row after replacing row `row` of M with dk * 1 (negative rows count from
/// the end). Throws std::runtime_error if the factorization fails or the solution is not finite.
Eigen::VectorXd solve_normalized(const SparseMatrix& M, double dk, int row = -1);

struct DensityTriple {
  PerRegime<Vector> g;
  /// |dk * sum(g) - 1| after clipping and renormalization.
  double mass_error = 0.0;
  /// Most negative entry of the raw solve (0 when none).
  double max_negativity = 0.0;
  /// Probability mass removed by clipping negatives.
  double clipped_mass = 0.0;

  Vector total() const;
  double share(Regime r, double dk) const;
};

/// Clips negatives (renormalizing when the clipped mass is below 1e-8, throwing otherwise).
DensityTriple solve_stationary(const KfeSystem& system, const Grid& grid, int normalization_row = -1);

/// Per-regime sup norm of dk * (M g) for the un-normalized system.
std::array<double, 3> block_residuals(const KfeSystem& system, const DensityTriple& density, double dk);

/// Shares under instantaneous signaling: (lambda_HL, lambda_LH) / (lambda_LH + lambda_HL).
std::pair<double, double> limiting_shares(const Calibration& cal);

}  // namespace twinpeaks
