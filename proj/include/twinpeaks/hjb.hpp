#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "twinpeaks/calibration.hpp"
#include "twinpeaks/model.hpp"
#include "twinpeaks/tridiagonal.hpp"

namespace twinpeaks {

using ValueTriple = PerRegime<Vector>;

struct PolicyTriple {
  PerRegime<Vector> c;
  PerRegime<Vector> mu;
};

enum class UpwindCase { forward, backward, zero_drift };
std::string_view to_string(UpwindCase c);

struct UpwindChoice {
  double slope = 0.0;
  double c = 0.0;
  double mu = 0.0;
  UpwindCase kind = UpwindCase::zero_drift;
};

/// Upwind marginal value at node i (0-based). A nonpositive candidate slope is
/// treated as unusable and the node falls through to the zero-drift branch.
UpwindChoice upwind_slope(std::span<const double> V, std::size_t i, Regime r, const Calibration& cal,
                          const Grid& grid);

/// Upwind consumption and drift at every node. The last node always consumes net income
/// (zero drift), which makes the upper boundary reflecting.
struct Policy {
  Vector c;
  Vector mu;
};
Policy extract_policy(std::span<const double> V, Regime r, const Calibration& cal, const Grid& grid);

/// Generator coefficients: x multiplies V_{i+1}, y multiplies V_{i-1}, z = -(x + y).
struct UpwindCoeffs {
  Vector x, y, z;
};
UpwindCoeffs assemble_coeffs(std::span<const double> mu, const Calibration& cal, const Grid& grid);
UpwindCoeffs assemble_coeffs(std::span<const double> mu, double sigma, double dk);

/// The generator as a tridiagonal matrix (row i: y_i, z_i, x_i).
Tridiagonal generator_matrix(const UpwindCoeffs& coeffs);

/// Implicit system matrix (1/dt + rho + lambda_out) I - generator.
Tridiagonal implicit_system(const UpwindCoeffs& coeffs, double rho, double lambda_out, double dt);

/// Positive diagonal, nonpositive off-diagonals, strict row diagonal dominance.
bool is_m_matrix(const Tridiagonal& m);

/// One implicit step: solves implicit_system * V = V_prev/dt + u_vec + inflow.
/// Throws std::runtime_error if the assembled matrix is not an M-matrix.
Vector implicit_update(std::span<const double> V_prev, const UpwindCoeffs& coeffs, std::span<const double> u_vec,
                       double lambda_out, std::span<const double> inflow, const Calibration& cal, double dt);
Vector implicit_update(std::span<const double> V_prev, const UpwindCoeffs& coeffs, std::span<const double> u_vec,
                       double lambda_out, std::span<const double> inflow, const Calibration& cal);

/// Piecewise-linear interpolation on the grid. Queries outside [k_1, k_N] take the end value
/// and set *clipped when provided. NaN queries or NaN bracketing values throw.
double interp_linear(std::span<const double> values, double k, const Grid& grid, bool* clipped = nullptr);

struct SignalRegion {
  Mask flags;
  std::optional<std::size_t> kstar_index;
  double kstar = std::numeric_limits<double>::infinity();
  /// Number of exercise targets k_i - phi that fell below k_1 and were clipped.
  std::size_t clipped = 0;

  bool empty() const noexcept { return !kstar_index.has_value(); }
  std::size_t count() const noexcept;
};

/// Builds kstar_index/kstar from flags.
SignalRegion make_signal_region(Mask flags, const Grid& grid, std::size_t clipped = 0);

/// Exercise payoff V_H(k_i - phi) at nodes with k_i >= phi, NaN elsewhere.
Vector exercise_payoff(std::span<const double> V_H, const Calibration& cal, const Grid& grid,
                       std::size_t* clipped = nullptr);

struct Projection {
  Vector V_W;
  SignalRegion region;
};
/// Pointwise projection of V_W onto the exercise payoff: nodes where the payoff strictly
/// exceeds V_W are raised to it and flagged.
Projection american_projection(std::span<const double> V_W, std::span<const double> V_H, const Calibration& cal,
                               const Grid& grid);

struct WPolicy {
  Vector c;
  Vector mu;
  UpwindCoeffs coeffs;
};
/// Upwind policy in the wait region; in the signal region the agent inherits the H policy
/// at the post-exercise capital k_i - phi.
WPolicy recompute_w_policy(std::span<const double> V_W, std::span<const double> c_H, std::span<const double> mu_H,
                           const SignalRegion& region, const Calibration& cal, const Grid& grid);

struct SolveReport {
  int iterations = 0;
  std::vector<double> errors;
  bool converged = false;
  WStepMode w_step = WStepMode::complementarity;
  std::size_t m_matrix_checks = 0;
  /// Largest number of active-set sweeps used by any W step (complementarity mode).
  int max_active_set_sweeps = 0;
  /// W steps whose active set did not settle within the sweep cap.
  int unsettled_active_sets = 0;
};

struct HjbSolution {
  Calibration cal;
  Grid grid;
  ValueTriple V;
  PolicyTriple policy;
  SignalRegion signal;
  /// Generator coefficients of the converged policies (W uses the post-exercise policy).
  PerRegime<UpwindCoeffs> coeffs;
  SolveReport report;
};

/// Coupled implicit policy iteration, Gauss-Seidel order L -> W -> H. Returns the last
/// iterate with report.converged = false if max_iter is reached.
HjbSolution solve_hjb(const Calibration& cal);

/// Signaling surplus V_W(k_i) - V_H(k_i - phi); NaN below phi.
Vector surplus(const ValueTriple& V, const Calibration& cal, const Grid& grid);

/// |backward slope of V_W at k* - backward slope of V_H at k* - phi|; NaN without a threshold
/// or when k* sits on the first node.
double smooth_pasting_residual(const HjbSolution& sol);

}  // namespace twinpeaks
