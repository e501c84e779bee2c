#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "twinpeaks/calibration.hpp"
#include "twinpeaks/hjb.hpp"
#include "twinpeaks/kfe.hpp"
#include "twinpeaks/model.hpp"

namespace twinpeaks {

/// Zero crossings of mu from positive to negative. Adjacent +/- nodes are interpolated
/// linearly; a run of exact zeros between them reports the run's midpoint.
std::vector<double> find_attractors(std::span<const double> mu, const Grid& grid);

/// dc/dk at every node: central differences inside, one-sided at the ends.
Vector node_derivative(std::span<const double> c, const Grid& grid);
double mpc(std::span<const double> c, const Grid& grid, double k);
/// Consumption over gross output f_j(k).
double apc(std::span<const double> c, Regime r, const Calibration& cal, const Grid& grid, double k);

struct WeightedMpc {
  PerRegime<std::optional<double>> by_regime;
  std::optional<double> aggregate;
};
WeightedMpc weighted_mpc(const DensityTriple& density, const PolicyTriple& policy, const Grid& grid);

/// Mean absolute difference over twice the mean, for nonnegative weights on sorted nodes.
double gini(std::span<const double> weights, std::span<const double> nodes);
double gini(std::span<const double> g, const Grid& grid);
double mean_wealth(std::span<const double> g, const Grid& grid);

struct EulerTerms {
  double ramsey = 0.0;
  double precautionary = 0.0;
  double switching = 0.0;
  double bracket_sum = 0.0;
  /// Range of the precautionary term over second-difference widths dk, 2dk, 4dk.
  double precautionary_lo = 0.0;
  double precautionary_hi = 0.0;
  bool reliable = true;
};
/// Terms of the consumption Euler equation at capital k. Destination regimes: L -> W, W -> L, H -> L.
EulerTerms euler_decomposition(const PolicyTriple& policy, const Calibration& cal, const Grid& grid, double k,
                               Regime r, const SignalRegion* region = nullptr);

struct Separation {
  double gap = 0.0;
  double sigma_ss_L = 0.0;
  double sigma_ss_H = 0.0;
  bool satisfied = false;
};
/// Local Gaussian spread sigma / sqrt(2 |mu'|) around each attractor.
double local_spread(std::span<const double> mu, const Grid& grid, double k, double sigma);
Separation separation_check(double kss_L, double kss_H, const PolicyTriple& policy, const Calibration& cal,
                            const Grid& grid);

struct Peak {
  double location = 0.0;
  double height = 0.0;
  double prominence = 0.0;
};
/// Interior local maxima whose topographic prominence exceeds fraction * max(g).
std::vector<Peak> bimodality(std::span<const double> g, const Grid& grid, double fraction = 0.05);

struct Phenotypes {
  double hand_to_mouth = 0.0;
  double structurally_trapped = 0.0;
  double frustrated_aspirants = 0.0;
  double decaying_rentiers = 0.0;
  double successful_signalers = 0.0;
  /// L mass with 2 <= k <= phi, counted inside structurally_trapped.
  double folded_residual = 0.0;
  /// No threshold: L splits only into hand-to-mouth and trapped.
  bool degenerate = false;

  double total() const {
    return hand_to_mouth + structurally_trapped + frustrated_aspirants + decaying_rentiers + successful_signalers;
  }
};
inline constexpr double kHandToMouthCutoff = 2.0;
Phenotypes phenotypes(const DensityTriple& density, const SignalRegion& region, const Calibration& cal,
                      const Grid& grid);

enum class RegimeClass { immediate, interior, none };
std::string_view to_string(RegimeClass c);
RegimeClass classify_regime(const SignalRegion& region, const Calibration& cal, const Grid& grid);

struct BimodalityConditions {
  /// Exactly one stable zero of the drift in each of L and H.
  bool c1 = false;
  bool c2 = false;
  /// Signaling active with a waiting phase: phi <= k* < infinity.
  bool c3 = false;
  /// Both switching rates are slow relative to the accumulation times below.
  bool c4 = false;
  /// Years for an H entrant at k* - phi to come within one local spread of the H attractor.
  double t_acc_H = 0.0;
  /// Years for a W agent at the L attractor to reach k*.
  double t_acc_W = 0.0;
};
/// "Slow" is read as lambda * T <= 0.1.
inline constexpr double kSlowCouplingBound = 0.1;

struct DiagnosticsReport {
  std::vector<double> attractors_L, attractors_H;
  std::optional<double> kss_L, kss_H;
  double kss_L_det = 0.0;
  double kss_H_det = 0.0;
  double kstar = 0.0;
  RegimeClass regime_class = RegimeClass::none;
  std::optional<double> surplus_at_phi;
  std::optional<double> smooth_pasting;
  PerRegime<std::optional<double>> mpc_at;
  PerRegime<std::optional<double>> apc_at;
  /// f'_j - delta at each attractor.
  PerRegime<std::optional<double>> net_return_at;
  PerRegime<std::optional<EulerTerms>> euler_at;
  WeightedMpc weighted_mpc;
  double gini = 0.0;
  double mean_wealth = 0.0;
  PerRegime<double> shares;
  std::optional<Separation> separation;
  std::vector<Peak> peaks;
  Phenotypes phenotypes;
  BimodalityConditions conditions;
};

/// Picks the attractor nearest the deterministic benchmark when several exist.
std::optional<double> principal_attractor(const std::vector<double>& roots, double benchmark);

DiagnosticsReport diagnose(const HjbSolution& sol, const DensityTriple& density);

}  // namespace twinpeaks
