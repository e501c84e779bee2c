#include "twinpeaks/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace twinpeaks {

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::L: return "L";
    case Regime::W: return "W";
    case Regime::H: return "H";
  }
  return "?";
}

Grid::Grid(double k_min, double k_max, int n) {
  if (n < 3) throw std::invalid_argument("grid needs at least 3 points");
  if (!(k_max > k_min)) throw std::invalid_argument("grid requires k_max > k_min");
  dk_ = (k_max - k_min) / static_cast<double>(n - 1);
  nodes_.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < nodes_.size(); ++i) nodes_[i] = k_min + static_cast<double>(i) * dk_;
}

Grid::Cell Grid::locate(double k) const {
  if (std::isnan(k)) throw std::invalid_argument("cannot locate NaN on the grid");
  const std::size_t n = nodes_.size();
  if (k < nodes_.front()) return {0, 0.0, true};
  if (k >= nodes_.back()) return {n - 1, 0.0, k > nodes_.back()};
  auto lower = static_cast<std::size_t>(std::floor((k - nodes_.front()) / dk_));
  lower = std::min(lower, n - 2);
  double weight = (k - nodes_[lower]) / dk_;
  if (weight < 0.0) weight = 0.0;
  if (weight >= 1.0) {
    ++lower;
    weight = 0.0;
  }
  return {lower, weight, false};
}

std::size_t Grid::first_at_or_above(double k) const {
  return static_cast<std::size_t>(std::lower_bound(nodes_.begin(), nodes_.end(), k) - nodes_.begin());
}

double tfp(Regime r, const Calibration& cal) { return r == Regime::H ? cal.A_H : cal.A_L; }

double utility(double c, double gamma) {
  if (!(c > 0.0)) throw std::domain_error("utility requires positive consumption");
  return std::pow(c, 1.0 - gamma) / (1.0 - gamma);
}

double marginal_utility(double c, double gamma) {
  if (!(c > 0.0)) throw std::domain_error("marginal utility requires positive consumption");
  return std::pow(c, -gamma);
}

double marginal_utility_inverse(double vprime, double gamma) {
  if (!(vprime > 0.0)) throw std::domain_error("marginal value must be positive (non-concave iterate)");
  return std::pow(vprime, -1.0 / gamma);
}

double production(double k, Regime r, const Calibration& cal) {
  if (k < 0.0) throw std::domain_error("production requires nonnegative capital");
  return tfp(r, cal) * std::pow(k, cal.alpha);
}

double marginal_product(double k, Regime r, const Calibration& cal) {
  if (!(k > 0.0)) throw std::domain_error("marginal product requires positive capital");
  return cal.alpha * tfp(r, cal) * std::pow(k, cal.alpha - 1.0);
}

double drift(double k, double c, Regime r, const Calibration& cal) {
  if (c < 0.0) throw std::domain_error("drift requires nonnegative consumption");
  return production(k, r, cal) - c - cal.delta * k;
}

double zero_drift_consumption(double k, Regime r, const Calibration& cal) {
  return production(k, r, cal) - cal.delta * k;
}

double deterministic_steady_state(Regime r, const Calibration& cal) {
  if (r == Regime::W) throw std::invalid_argument("deterministic steady state is defined for L and H");
  return std::pow(cal.alpha * tfp(r, cal) / (cal.rho + cal.delta), 1.0 / (1.0 - cal.alpha));
}

}  // namespace twinpeaks
