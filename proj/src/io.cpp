#include "twinpeaks/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace twinpeaks {

namespace {

constexpr int kDigits = 12;

void append_row(std::string& out, std::initializer_list<std::string> fields) {
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ',';
    out += f;
    first = false;
  }
  out += '\n';
}

std::string to_hex(const unsigned char* bytes, unsigned len) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s(2 * len, '0');
  for (unsigned i = 0; i < len; ++i) {
    s[2 * i] = kHex[bytes[i] >> 4];
    s[2 * i + 1] = kHex[bytes[i] & 0xF];
  }
  return s;
}

ordered_json optional_number(const std::optional<double>& v) { return v ? json_number(*v) : ordered_json(nullptr); }

ordered_json per_regime_json(const PerRegime<std::optional<double>>& v, std::initializer_list<Regime> regimes) {
  ordered_json j = ordered_json::object();
  for (Regime r : regimes) j[std::string(to_string(r))] = optional_number(v[r]);
  return j;
}

ordered_json euler_json(const EulerTerms& t) {
  ordered_json j;
  j["ramsey"] = json_number(t.ramsey);
  j["precautionary"] = json_number(t.precautionary);
  j["precautionary_band"] = {json_number(t.precautionary_lo), json_number(t.precautionary_hi)};
  j["switching"] = json_number(t.switching);
  j["bracket_sum"] = json_number(t.bracket_sum);
  j["reliable"] = t.reliable;
  return j;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, kDigits);
  return std::string(buf, res.ptr);
}

ordered_json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  if (v == 0.0) return 0.0;
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, kDigits);
  double rounded = 0.0;
  std::from_chars(buf, res.ptr, rounded);
  return rounded;
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  return to_hex(md, len);
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string solution_csv(const HjbSolution& sol) {
  const Vector D = surplus(sol.V, sol.cal, sol.grid);
  std::string out = "k,V_L,V_W,V_H,c_L,c_W,c_H,mu_L,mu_W,mu_H,signal_flag,D\n";
  const auto& V = sol.V;
  const auto& c = sol.policy.c;
  const auto& mu = sol.policy.mu;
  using R = Regime;
  for (std::size_t i = 0; i < sol.grid.size(); ++i) {
    append_row(out, {format_number(sol.grid[i]), format_number(V[R::L][i]), format_number(V[R::W][i]),
                     format_number(V[R::H][i]), format_number(c[R::L][i]), format_number(c[R::W][i]),
                     format_number(c[R::H][i]), format_number(mu[R::L][i]), format_number(mu[R::W][i]),
                     format_number(mu[R::H][i]), sol.signal.flags[i] ? "1" : "0", format_number(D[i])});
  }
  return out;
}

std::string distribution_csv(const Grid& grid, const DensityTriple& density) {
  std::string out = "k,g_L,g_W,g_H,g_total\n";
  const Vector total = density.total();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    append_row(out, {format_number(grid[i]), format_number(density.g[Regime::L][i]),
                     format_number(density.g[Regime::W][i]), format_number(density.g[Regime::H][i]),
                     format_number(total[i])});
  }
  return out;
}

ordered_json shares_json(const DensityTriple& density, const Grid& grid) {
  ordered_json j;
  j["pi_L"] = json_number(density.share(Regime::L, grid.dk()));
  j["pi_W"] = json_number(density.share(Regime::W, grid.dk()));
  j["pi_H"] = json_number(density.share(Regime::H, grid.dk()));
  j["mass_error"] = json_number(density.mass_error);
  j["max_negativity"] = json_number(density.max_negativity);
  return j;
}

ordered_json report_json(const HjbSolution& sol, const DensityTriple* density, const DiagnosticsReport* report,
                         const KfeSystem* kfe, std::string_view config_sha256) {
  const Calibration& cal = sol.cal;
  ordered_json j;

  ordered_json prov;
  prov["config_sha256"] = std::string(config_sha256);
  prov["calibration"] = ordered_json::parse(cal.to_json().dump());
  prov["grid"] = {{"N", cal.N}, {"k_min", json_number(cal.k_min)}, {"k_max", json_number(cal.k_max)},
                  {"dk", json_number(sol.grid.dk())}};
  prov["w_step"] = std::string(to_string(sol.report.w_step));
  prov["iterations"] = sol.report.iterations;
  prov["converged"] = sol.report.converged;
  prov["final_error"] = sol.report.errors.empty() ? ordered_json(nullptr) : json_number(sol.report.errors.back());
  prov["m_matrix_checks"] = sol.report.m_matrix_checks;
  prov["max_active_set_sweeps"] = sol.report.max_active_set_sweeps;
  prov["unsettled_active_sets"] = sol.report.unsettled_active_sets;
  prov["exercise_target_clips"] = sol.signal.clipped;
  j["provenance"] = prov;

  const bool signals = sol.signal.kstar_index.has_value();
  j["kstar"] = signals ? json_number(sol.signal.kstar) : ordered_json(nullptr);
  j["wait_width"] = signals ? json_number(sol.signal.kstar - cal.phi) : ordered_json(nullptr);
  j["signaling"] = signals ? "active" : "no signaling (k* = +inf)";
  j["signal_nodes"] = sol.signal.count();

  if (report) {
    const DiagnosticsReport& r = *report;
    j["regime_class"] = std::string(to_string(r.regime_class));
    j["surplus_at_phi"] = optional_number(r.surplus_at_phi);
    j["smooth_pasting_residual"] = optional_number(r.smooth_pasting);
    j["kss_L"] = optional_number(r.kss_L);
    j["kss_H"] = optional_number(r.kss_H);
    j["kss_L_det"] = json_number(r.kss_L_det);
    j["kss_H_det"] = json_number(r.kss_H_det);
    ordered_json att;
    att["L"] = ordered_json::array();
    att["H"] = ordered_json::array();
    for (double a : r.attractors_L) att["L"].push_back(json_number(a));
    for (double a : r.attractors_H) att["H"].push_back(json_number(a));
    j["attractors"] = att;
    j["mpc_at"] = per_regime_json(r.mpc_at, {Regime::L, Regime::H});
    j["apc_at"] = per_regime_json(r.apc_at, {Regime::L, Regime::H});
    j["net_return_at"] = per_regime_json(r.net_return_at, {Regime::L, Regime::H});
    ordered_json gap = ordered_json::object();
    for (Regime g : {Regime::L, Regime::H}) {
      gap[std::string(to_string(g))] =
          r.net_return_at[g] ? json_number(*r.net_return_at[g] - cal.rho) : ordered_json(nullptr);
    }
    j["euler_gap"] = gap;
    ordered_json eu = ordered_json::object();
    for (Regime g : {Regime::L, Regime::H}) {
      eu[std::string(to_string(g))] = r.euler_at[g] ? euler_json(*r.euler_at[g]) : ordered_json(nullptr);
    }
    j["euler_decomposition"] = eu;
    ordered_json wm = per_regime_json(r.weighted_mpc.by_regime, {Regime::L, Regime::W, Regime::H});
    wm["aggregate"] = optional_number(r.weighted_mpc.aggregate);
    j["weighted_mpc"] = wm;
    j["gini"] = json_number(r.gini);
    j["mean_wealth"] = json_number(r.mean_wealth);
    j["shares"] = {{"L", json_number(r.shares[Regime::L])},
                   {"W", json_number(r.shares[Regime::W])},
                   {"H", json_number(r.shares[Regime::H])}};
    if (r.separation) {
      j["separation"] = {{"gap", json_number(r.separation->gap)},
                         {"sigma_ss_L", json_number(r.separation->sigma_ss_L)},
                         {"sigma_ss_H", json_number(r.separation->sigma_ss_H)},
                         {"factor", json_number(cal.separation_factor)},
                         {"satisfied", r.separation->satisfied}};
    } else {
      j["separation"] = nullptr;
    }
    ordered_json peaks = ordered_json::array();
    for (const Peak& p : r.peaks) {
      peaks.push_back({{"location", json_number(p.location)},
                       {"height", json_number(p.height)},
                       {"prominence", json_number(p.prominence)}});
    }
    j["peaks"] = peaks;
    const Phenotypes& ph = r.phenotypes;
    j["phenotype_shares"] = {{"hand_to_mouth", json_number(ph.hand_to_mouth)},
                             {"structurally_trapped", json_number(ph.structurally_trapped)},
                             {"frustrated_aspirants", json_number(ph.frustrated_aspirants)},
                             {"decaying_rentiers", json_number(ph.decaying_rentiers)},
                             {"successful_signalers", json_number(ph.successful_signalers)},
                             {"folded_residual", json_number(ph.folded_residual)},
                             {"degenerate", ph.degenerate}};
    const BimodalityConditions& c = r.conditions;
    j["bimodality_conditions"] = {{"C1", c.c1},
                                  {"C2", c.c2},
                                  {"C3", c.c3},
                                  {"C4", c.c4},
                                  {"t_acc_H", json_number(c.t_acc_H)},
                                  {"t_acc_W", json_number(c.t_acc_W)}};
  }
  if (density) {
    j["density"] = {{"mass_error", json_number(density->mass_error)},
                    {"max_negativity", json_number(density->max_negativity)},
                    {"clipped_mass", json_number(density->clipped_mass)}};
  }
  if (kfe) j["kfe_max_column_sum"] = json_number(kfe->max_column_sum);
  return j;
}

std::string mc_distribution_csv(const Grid& grid, const EmpiricalDistribution& empirical) {
  std::string out = "k,g_L,g_W,g_H,g_total,sample_count\n";
  const DensityTriple d = as_density(empirical, grid);
  const Vector total = d.total();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::uint64_t count =
        empirical.counts[Regime::L][i] + empirical.counts[Regime::W][i] + empirical.counts[Regime::H][i];
    append_row(out, {format_number(grid[i]), format_number(d.g[Regime::L][i]), format_number(d.g[Regime::W][i]),
                     format_number(d.g[Regime::H][i]), format_number(total[i]), std::to_string(count)});
  }
  return out;
}

ordered_json mc_compare_json(const Comparison& cmp, const EmpiricalDistribution& empirical, const SimConfig& config) {
  ordered_json j;
  j["share_gaps"] = {{"L", json_number(cmp.share_gaps[Regime::L])},
                     {"W", json_number(cmp.share_gaps[Regime::W])},
                     {"H", json_number(cmp.share_gaps[Regime::H])}};
  j["max_share_gap"] = json_number(cmp.max_share_gap);
  j["l1_distance"] = json_number(cmp.l1_distance);
  j["mean_empirical"] = json_number(cmp.mean_empirical);
  j["mean_kfe"] = json_number(cmp.mean_kfe);
  j["mean_gap"] = json_number(cmp.mean_gap);
  j["empirical_shares"] = {{"L", json_number(empirical.share(Regime::L))},
                           {"W", json_number(empirical.share(Regime::W))},
                           {"H", json_number(empirical.share(Regime::H))}};
  j["samples"] = empirical.samples;
  j["excursions"] = empirical.excursions;
  j["w_samples_above_kstar"] = empirical.w_samples_above_kstar;
  j["transitions"] = {{"L_to_W", empirical.transitions.L_to_W},
                      {"W_to_L", empirical.transitions.W_to_L},
                      {"W_to_H", empirical.transitions.W_to_H},
                      {"H_to_L", empirical.transitions.H_to_L}};
  j["occupancy_years"] = {{"L", json_number(empirical.occupancy[Regime::L])},
                          {"W", json_number(empirical.occupancy[Regime::W])},
                          {"H", json_number(empirical.occupancy[Regime::H])}};
  j["config"] = {{"mode", std::string(to_string(config.mode))},
                 {"paths", config.paths()},
                 {"horizon", json_number(config.horizon)},
                 {"dt", json_number(config.dt_sim)},
                 {"burn_in", json_number(config.burn_in)},
                 {"seed", config.seed},
                 {"sample_interval", json_number(config.sample_interval)}};
  j["exercise_timing"] = "checked at the start of each step; crossings mid-step exercise one step late";
  return j;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::runtime_error("CSV column missing: " + std::string(name));
}

namespace {

double parse_cell(std::string_view cell, std::string_view where) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  if (cell == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw std::runtime_error(std::string(where) + ": bad number '" + std::string(cell) + "'");
  }
  return v;
}

}  // namespace

Vector CsvTable::values(std::string_view name) const {
  const std::size_t c = column(name);
  Vector out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.push_back(parse_cell(rows[r][c], "column " + std::string(name) + " row " + std::to_string(r + 1)));
  }
  return out;
}

std::vector<std::string> CsvTable::text(std::string_view name) const {
  const std::size_t c = column(name);
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[c]);
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path.string());
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t end = line.find(',', start);
      row.push_back(line.substr(start, (end == std::string::npos ? line.size() : end) - start));
      if (end == std::string::npos) break;
      start = end + 1;
    }
    if (row.size() != t.header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": wrong number of fields");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace twinpeaks
