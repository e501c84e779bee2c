#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "twinpeaks/calibration.hpp"

namespace twinpeaks {

/// Productivity state of an agent: L (no opportunity), W (opportunity held), H (signaled).
enum class Regime : std::uint8_t { L = 0, W = 1, H = 2 };

inline constexpr std::array<Regime, 3> kRegimes{Regime::L, Regime::W, Regime::H};

std::string_view to_string(Regime r);

/// One value per regime, indexed by Regime.
template <class T>
struct PerRegime {
  std::array<T, 3> items{};

  T& operator[](Regime r) { return items[static_cast<std::size_t>(r)]; }
  const T& operator[](Regime r) const { return items[static_cast<std::size_t>(r)]; }
};

using Vector = std::vector<double>;
/// Per-node boolean flags; kept as bytes so they can be viewed through std::span.
using Mask = std::vector<std::uint8_t>;

/// Uniform capital grid k_i = k_min + i * dk, i = 0..N-1.
class Grid {
 public:
  Grid(double k_min, double k_max, int n);
  explicit Grid(const Calibration& cal) : Grid(cal.k_min, cal.k_max, cal.N) {}

  std::size_t size() const noexcept { return nodes_.size(); }
  double dk() const noexcept { return dk_; }
  double operator[](std::size_t i) const { return nodes_[i]; }
  double front() const noexcept { return nodes_.front(); }
  double back() const noexcept { return nodes_.back(); }
  std::span<const double> nodes() const noexcept { return nodes_; }

  /// Cell holding a capital level: k = (1 - weight) * k_lower + weight * k_{lower+1},
  /// weight in [0, 1). Queries outside [k_1, k_N] snap to the nearest end and set clipped.
  struct Cell {
    std::size_t lower = 0;
    double weight = 0.0;
    bool clipped = false;
  };
  Cell locate(double k) const;

  /// Index of the first node with k_i >= k, or size() when none.
  std::size_t first_at_or_above(double k) const;

 private:
  std::vector<double> nodes_;
  double dk_;
};

double tfp(Regime r, const Calibration& cal);

/// CRRA utility c^(1-gamma) / (1-gamma). Throws std::domain_error for c <= 0.
double utility(double c, double gamma);
double marginal_utility(double c, double gamma);
/// Consumption implied by the first-order condition u'(c) = vprime.
double marginal_utility_inverse(double vprime, double gamma);

double production(double k, Regime r, const Calibration& cal);
double marginal_product(double k, Regime r, const Calibration& cal);
double drift(double k, double c, Regime r, const Calibration& cal);
/// Consumption that leaves capital unchanged: f_j(k) - delta k.
double zero_drift_consumption(double k, Regime r, const Calibration& cal);

/// Stable steady state of the deterministic, uncoupled problem: f'_j(k) - delta = rho.
/// Defined for L and H only.
double deterministic_steady_state(Regime r, const Calibration& cal);

}  // namespace twinpeaks
