#include "twinpeaks/calibration.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace twinpeaks {

namespace {

struct RealField {
  const char* name;
  double Calibration::*member;
};

struct IntField {
  const char* name;
  int Calibration::*member;
};

constexpr RealField kRealFields[] = {
    {"gamma", &Calibration::gamma},
    {"rho", &Calibration::rho},
    {"alpha", &Calibration::alpha},
    {"delta", &Calibration::delta},
    {"A_L", &Calibration::A_L},
    {"A_H", &Calibration::A_H},
    {"sigma", &Calibration::sigma},
    {"lambda_LH", &Calibration::lambda_LH},
    {"lambda_HL", &Calibration::lambda_HL},
    {"phi", &Calibration::phi},
    {"k_min", &Calibration::k_min},
    {"k_max", &Calibration::k_max},
    {"dt", &Calibration::dt},
    {"tol", &Calibration::tol},
    {"lambda_bar", &Calibration::lambda_bar},
    {"dt_ramp_start", &Calibration::dt_ramp_start},
    {"dt_ramp_factor", &Calibration::dt_ramp_factor},
    {"separation_factor", &Calibration::separation_factor},
    {"peak_prominence", &Calibration::peak_prominence},
};

constexpr IntField kIntFields[] = {
    {"N", &Calibration::N},
    {"max_iter", &Calibration::max_iter},
    {"normalization_row", &Calibration::normalization_row},
};

constexpr const char* kWStepKey = "w_step";

WStepMode parse_w_step(const std::string& text) {
  if (text == "complementarity") return WStepMode::complementarity;
  if (text == "projection") return WStepMode::projection;
  throw ConfigError(kWStepKey, "expected \"complementarity\" or \"projection\", got \"" + text + "\"");
}

int to_int(std::string_view name, double value) {
  if (!std::isfinite(value) || value != std::floor(value) || std::abs(value) > 1e9) {
    throw ConfigError(std::string(name), "expected an integer");
  }
  return static_cast<int>(value);
}

void require(bool ok, const char* field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

}  // namespace

std::string_view to_string(WStepMode mode) {
  return mode == WStepMode::complementarity ? "complementarity" : "projection";
}

void Calibration::validate() const {
  for (const auto& f : kRealFields) {
    require(std::isfinite(this->*f.member), f.name, "must be finite");
  }
  require(gamma > 0.0, "gamma", "risk aversion must be positive");
  require(gamma != 1.0, "gamma", "log utility (gamma = 1) is not supported");
  require(rho > 0.0, "rho", "discount rate must be positive");
  require(alpha > 0.0 && alpha < 1.0, "alpha", "capital elasticity must lie in (0, 1)");
  require(delta > 0.0, "delta", "capital must depreciate (delta > 0)");
  require(A_L > 0.0, "A_L", "TFP must be positive");
  require(A_H > A_L, "A_H", "must exceed A_L (signaling leads to higher TFP)");
  require(sigma > 0.0, "sigma", "diffusion must be positive");
  require(lambda_LH >= 0.0, "lambda_LH", "intensity must be nonnegative");
  require(lambda_HL >= 0.0, "lambda_HL", "intensity must be nonnegative");
  require(phi > 0.0, "phi", "signaling must be costly (phi > 0)");
  require(N >= 3, "N", "grid needs at least 3 points");
  require(k_min > 0.0, "k_min", "lower grid bound must be positive");
  require(k_max > k_min, "k_max", "must exceed k_min");
  require(phi > k_min && phi < k_max, "phi", "must lie strictly inside (k_min, k_max)");
  // Zero-drift consumption at the upper boundary must be positive in every regime.
  require(A_L * std::pow(k_max, alpha) - delta * k_max > 0.0, "k_max",
          "net income A_L k^alpha - delta k must stay positive at k_max");
  require(dt > 0.0, "dt", "implicit step must be positive");
  require(tol > 0.0, "tol", "tolerance must be positive");
  require(lambda_bar > 0.0, "lambda_bar", "drain rate must be positive");
  require(max_iter >= 1, "max_iter", "must be at least 1");
  require(dt_ramp_start >= 0.0, "dt_ramp_start", "must be nonnegative (0 disables the ramp)");
  require(dt_ramp_factor >= 1.0, "dt_ramp_factor", "must be at least 1");
  require(normalization_row >= -3 * N && normalization_row < 3 * N, "normalization_row",
          "must index a row of the 3N forward system");
  require(separation_factor > 0.0, "separation_factor", "must be positive");
  require(peak_prominence >= 0.0 && peak_prominence < 1.0, "peak_prominence", "must lie in [0, 1)");
}

double Calibration::step_size(int iteration) const {
  if (dt_ramp_start <= 0.0) return dt;
  const double ramped = dt_ramp_start * std::pow(dt_ramp_factor, iteration - 1);
  return std::min(dt, ramped);
}

Calibration Calibration::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("<root>", "configuration must be a JSON object");
  Calibration cal;
  for (const auto& [key, value] : doc.items()) {
    if (key == kWStepKey) {
      if (!value.is_string()) throw ConfigError(key, "expected a string");
      cal.w_step = parse_w_step(value.get<std::string>());
      continue;
    }
    (void)cal.get(key);  // rejects unknown keys before the type check
    if (!value.is_number()) throw ConfigError(key, "expected a number");
    cal.set(key, value.get<double>());
  }
  cal.validate();
  return cal;
}

Calibration Calibration::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return from_json(doc);
}

nlohmann::json Calibration::to_json() const {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& f : kRealFields) doc[f.name] = this->*f.member;
  for (const auto& f : kIntFields) doc[f.name] = this->*f.member;
  doc[kWStepKey] = std::string(to_string(w_step));
  return doc;
}

double Calibration::get(std::string_view name) const {
  for (const auto& f : kRealFields)
    if (name == f.name) return this->*f.member;
  for (const auto& f : kIntFields)
    if (name == f.name) return this->*f.member;
  throw ConfigError(std::string(name), "unknown configuration key");
}

void Calibration::set(std::string_view name, double value) {
  for (const auto& f : kRealFields) {
    if (name == f.name) {
      this->*f.member = value;
      return;
    }
  }
  for (const auto& f : kIntFields) {
    if (name == f.name) {
      this->*f.member = to_int(name, value);
      return;
    }
  }
  throw ConfigError(std::string(name), "unknown configuration key");
}

const std::vector<std::string>& Calibration::field_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : kRealFields) out.emplace_back(f.name);
    for (const auto& f : kIntFields) out.emplace_back(f.name);
    out.emplace_back(kWStepKey);
    return out;
  }();
  return names;
}

}  // namespace twinpeaks
