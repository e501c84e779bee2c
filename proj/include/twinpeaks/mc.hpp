#pragma once

#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

#include "twinpeaks/calibration.hpp"
#include "twinpeaks/hjb.hpp"
#include "twinpeaks/kfe.hpp"
#include "twinpeaks/model.hpp"

namespace twinpeaks {

enum class SimMode { ensemble, single_long_path };
std::string_view to_string(SimMode m);
SimMode parse_sim_mode(std::string_view text);

struct SimConfig {
  std::size_t n_paths = 1;
  double horizon = 2e5;
  double dt_sim = 0.05;
  double burn_in = 2e4;
  std::uint64_t seed = 20240611;
  SimMode mode = SimMode::single_long_path;
  /// Years between recorded samples after burn-in.
  double sample_interval = 1.0;
  /// Initial state; NaN starts at the deterministic L steady state.
  double start_k = std::numeric_limits<double>::quiet_NaN();
  Regime start_regime = Regime::L;
  /// Fold paths back at k_max instead of clamping them there.
  bool reflect_upper = false;
  /// Threads used in ensemble mode; results do not depend on it.
  unsigned workers = 1;

  /// Throws std::invalid_argument on dt_sim outside (0, 0.1], burn_in >= horizon, or no paths.
  void validate() const;
  /// Paths actually simulated: one in single-long-path mode.
  std::size_t paths() const noexcept { return mode == SimMode::single_long_path ? 1 : n_paths; }
};

struct TransitionCounts {
  std::uint64_t L_to_W = 0;
  std::uint64_t W_to_L = 0;
  std::uint64_t W_to_H = 0;
  std::uint64_t H_to_L = 0;
};

struct EmpiricalDistribution {
  /// Samples per regime at the nearest grid node.
  PerRegime<std::vector<std::uint64_t>> counts;
  std::uint64_t samples = 0;
  /// Clamps at k_max.
  std::uint64_t excursions = 0;
  TransitionCounts transitions;
  /// Years spent in each regime over the whole horizon, burn-in included.
  PerRegime<double> occupancy;
  /// W samples taken at k >= k*; nonzero only if the exercise rule is skipped.
  std::uint64_t w_samples_above_kstar = 0;

  double share(Regime r) const;
  /// Sample fraction at each node in regime r.
  Vector mass(Regime r) const;
  Vector total_mass() const;
  /// Mean capital of the binned samples.
  double mean(const Grid& grid) const;

  /// Adds another run's tallies (associative and commutative).
  void merge(const EmpiricalDistribution& other);
};

/// Euler-Maruyama simulation of the regime-switching diffusion under fixed policies.
EmpiricalDistribution simulate(const Calibration& cal, const PolicyTriple& policy, const SignalRegion& region,
                               const SimConfig& config);

struct Comparison {
  PerRegime<double> share_gaps;
  double max_share_gap = 0.0;
  /// Sum over nodes of |empirical mass - dk g|.
  double l1_distance = 0.0;
  double mean_empirical = 0.0;
  double mean_kfe = 0.0;
  double mean_gap = 0.0;
};
Comparison compare(const EmpiricalDistribution& empirical, const DensityTriple& density, const Grid& grid);

/// Histogram divided by dk, in the layout of a forward-equation density.
DensityTriple as_density(const EmpiricalDistribution& empirical, const Grid& grid);

}  // namespace twinpeaks
