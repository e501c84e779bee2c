#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace twinpeaks {

/// How the W-state optimal-stopping constraint is enforced inside each outer iteration.
enum class WStepMode {
  /// Obstacle rows are pinned inside the implicit linear solve (discrete
  /// complementarity problem solved by active-set policy iteration).
  complementarity,
  /// Plain implicit solve followed by a pointwise max against the exercise payoff.
  projection,
};

std::string_view to_string(WStepMode mode);

/// Raised when a configuration document is malformed or violates a model restriction.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Structural and computational parameters of one model run. Defaults are the
/// baseline calibration; every quantity is annual.
struct Calibration {
  // Preferences.
  double gamma = 2.0;
  double rho = 0.05;
  // Technology.
  double alpha = 0.33;
  double delta = 0.02;
  double A_L = 1.0;
  double A_H = 1.25;
  // Stochastic environment.
  double sigma = 0.30;
  double lambda_LH = 0.005;
  double lambda_HL = 0.002;
  // Signaling.
  double phi = 9.0;
  // Grid and solver.
  int N = 501;
  double k_min = 0.01;
  double k_max = 50.0;
  double dt = 500.0;
  double tol = 1e-8;
  double lambda_bar = 1e3;

  int max_iter = 500;
  /// Optional geometric ramp of the implicit step: dt_n = min(dt, start * factor^(n-1)).
  /// A start of 0 keeps dt constant.
  double dt_ramp_start = 0.0;
  double dt_ramp_factor = 2.0;
  WStepMode w_step = WStepMode::complementarity;
  /// Row of the forward system replaced by the normalization; negative counts from the end.
  int normalization_row = -1;
  /// Separation condition reads gap > factor * (sd_L + sd_H).
  double separation_factor = 2.0;
  /// Minimum peak prominence as a fraction of the density maximum.
  double peak_prominence = 0.05;

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  /// Implicit step used at outer iteration n (1-based).
  double step_size(int iteration) const;

  /// Missing keys keep their defaults; unknown keys are rejected. The result is validated.
  static Calibration from_json(const nlohmann::json& doc);
  static Calibration load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Numeric access by field name, used by parameter sweeps.
  double get(std::string_view name) const;
  void set(std::string_view name, double value);

  static const std::vector<std::string>& field_names();
};

}  // namespace twinpeaks
