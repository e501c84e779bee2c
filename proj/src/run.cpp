#include "twinpeaks/run.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "twinpeaks/diagnostics.hpp"
#include "twinpeaks/hjb.hpp"
#include "twinpeaks/kfe.hpp"

namespace twinpeaks {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void emit(RunManifest& m, const std::string& name, const std::string& content) {
  write_file_atomic(m.output_dir / name, content);
  m.files.emplace_back(name, sha256_hex(content));
}

void write_manifest(const RunManifest& m) { write_file_atomic(m.output_dir / "manifest.json", m.to_json().dump(2) + "\n"); }

// HJB -> KFE -> diagnostics into m.output_dir, which must exist.
void run_pipeline(const Calibration& cal, RunManifest& m) {
  const auto t_start = Clock::now();
  const HjbSolution sol = solve_hjb(cal);
  m.timings.emplace_back("hjb", seconds_since(t_start));
  m.iterations = sol.report.iterations;
  if (!sol.report.converged) {
    m.exit_code = kExitNotConverged;
    m.message = "HJB iteration did not converge within max_iter";
  }
  emit(m, "solution.csv", solution_csv(sol));

  std::optional<KfeSystem> kfe;
  std::optional<DensityTriple> density;
  std::optional<DiagnosticsReport> report;
  try {
    const auto t_kfe = Clock::now();
    kfe = assemble_kfe(sol);
    density = solve_stationary(*kfe, sol.grid, cal.normalization_row);
    m.timings.emplace_back("kfe", seconds_since(t_kfe));
    const auto t_diag = Clock::now();
    report = diagnose(sol, *density);
    m.timings.emplace_back("diagnostics", seconds_since(t_diag));
  } catch (const std::exception& e) {
    m.exit_code = kExitFailure;
    m.message = std::string("forward equation or diagnostics failed: ") + e.what();
  }

  if (density) {
    emit(m, "distribution.csv", distribution_csv(sol.grid, *density));
    emit(m, "shares.json", shares_json(*density, sol.grid).dump(2) + "\n");
  }
  emit(m, "report.json",
       report_json(sol, density ? &*density : nullptr, report ? &*report : nullptr, kfe ? &*kfe : nullptr,
                   m.config_sha256)
               .dump(2) +
           "\n");
  m.timings.emplace_back("total", seconds_since(t_start));
}

std::string sweep_dir_name(const std::string& param, double value) { return param + "=" + format_number(value); }

}  // namespace

ordered_json RunManifest::to_json() const {
  ordered_json j;
  j["command"] = command;
  j["config_path"] = config_path;
  j["config_sha256"] = config_sha256;
  j["output_dir"] = output_dir.string();
  j["exit_code"] = exit_code;
  j["message"] = message;
  j["iterations"] = iterations ? ordered_json(*iterations) : ordered_json(nullptr);
  ordered_json f = ordered_json::array();
  for (const auto& [name, sum] : files) f.push_back({{"name", name}, {"sha256", sum}});
  j["files"] = f;
  ordered_json t = ordered_json::object();
  for (const auto& [name, secs] : timings) t[name] = json_number(secs);
  j["timings_seconds"] = t;
  return j;
}

RunManifest cmd_solve(const fs::path& config, const fs::path& out) {
  RunManifest m;
  m.command = "solve";
  m.config_path = config.string();
  m.output_dir = out;
  Calibration cal;
  try {
    const std::string text = read_file(config);
    m.config_sha256 = sha256_hex(text);
    cal = Calibration::from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    m.exit_code = kExitFailure;
    m.message = std::string("invalid JSON: ") + e.what();
    return m;
  } catch (const std::exception& e) {
    m.exit_code = kExitFailure;
    m.message = e.what();
    return m;
  }
  try {
    fs::create_directories(out);
    run_pipeline(cal, m);
    write_manifest(m);
  } catch (const std::exception& e) {
    m.exit_code = kExitFailure;
    m.message = e.what();
  }
  return m;
}

RunManifest solve_to_directory(const Calibration& cal, const fs::path& out, const std::string& command) {
  RunManifest m;
  m.command = command;
  m.output_dir = out;
  try {
    cal.validate();
    fs::create_directories(out);
    const std::string text = cal.to_json().dump(2) + "\n";
    m.config_path = (out / "config.json").string();
    m.config_sha256 = sha256_hex(text);
    emit(m, "config.json", text);
    run_pipeline(cal, m);
    write_manifest(m);
  } catch (const std::exception& e) {
    m.exit_code = kExitFailure;
    m.message = e.what();
  }
  return m;
}

RunManifest cmd_sweep(const fs::path& config, const std::string& param, const std::vector<double>& values,
                      const fs::path& out, unsigned workers) {
  RunManifest m;
  m.command = "sweep";
  m.config_path = config.string();
  m.output_dir = out;
  Calibration base;
  try {
    const std::string text = read_file(config);
    m.config_sha256 = sha256_hex(text);
    base = Calibration::from_json(nlohmann::json::parse(text));
    (void)base.get(param);
    if (values.empty()) throw ConfigError("values", "sweep needs at least one value");
    fs::create_directories(out);
  } catch (const std::exception& e) {
    m.exit_code = kExitFailure;
    m.message = e.what();
    return m;
  }

  struct Row {
    std::string status = "pending";
    int exit_code = kExitFailure;
    ordered_json report;
  };
  std::vector<Row> rows(values.size());
  std::atomic<std::size_t> next{0};
  const auto t_start = Clock::now();

  auto work = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      Row& row = rows[i];
      const std::string name = sweep_dir_name(param, values[i]);
      const fs::path final_dir = out / name;
      fs::path staging = out / ("." + name + ".partial");
      try {
        Calibration cal = base;
        cal.set(param, values[i]);
        cal.validate();
        fs::remove_all(staging);
        const RunManifest sub = solve_to_directory(cal, staging, "sweep");
        row.exit_code = sub.exit_code;
        row.status = sub.exit_code == kExitOk ? "ok" : sub.message;
        if (fs::exists(staging / "report.json")) {
          row.report = ordered_json::parse(read_file(staging / "report.json"));
        }
        fs::remove_all(final_dir);
        fs::rename(staging, final_dir);
      } catch (const std::exception& e) {
        fs::remove_all(staging);
        row.exit_code = kExitFailure;
        row.status = e.what();
      }
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(values.size())));
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  auto field = [](const ordered_json& j, std::initializer_list<const char*> path) -> std::string {
    const ordered_json* cur = &j;
    for (const char* key : path) {
      if (!cur->is_object() || !cur->contains(key)) return "";
      cur = &(*cur)[key];
    }
    if (cur->is_number()) return format_number(cur->get<double>());
    if (cur->is_string()) return cur->get<std::string>();
    return "";
  };

  std::string csv = "param_value,kstar,kss_L,kss_H,pi_L,pi_W,pi_H,gini,mean_wealth,regime_class,status\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Row& row = rows[i];
    const ordered_json& r = row.report;
    std::string kstar = field(r, {"kstar"});
    if (kstar.empty() && r.is_object() && r.contains("signaling")) kstar = "inf";
    std::string status = row.status;
    for (char& ch : status) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    csv += format_number(values[i]) + "," + kstar + "," + field(r, {"kss_L"}) + "," + field(r, {"kss_H"}) + "," +
           field(r, {"shares", "L"}) + "," + field(r, {"shares", "W"}) + "," + field(r, {"shares", "H"}) + "," +
           field(r, {"gini"}) + "," + field(r, {"mean_wealth"}) + "," + field(r, {"regime_class"}) + "," + status +
           "\n";
    if (row.exit_code != kExitOk) m.exit_code = kExitNotConverged;
  }
  try {
    emit(m, "sweep_summary.csv", csv);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const fs::path sub = out / sweep_dir_name(param, values[i]) / "manifest.json";
      if (fs::exists(sub)) m.files.emplace_back(sweep_dir_name(param, values[i]) + "/manifest.json", sha256_file(sub));
    }
    m.timings.emplace_back("total", seconds_since(t_start));
    if (m.exit_code != kExitOk) m.message = "one or more sub-runs failed or did not converge";
    write_manifest(m);
  } catch (const std::exception& e) {
    m.exit_code = kExitFailure;
    m.message = e.what();
  }
  return m;
}

RunManifest cmd_simulate(const fs::path& config, const fs::path& solve_dir, const SimConfig& sim,
                         const fs::path& out) {
  RunManifest m;
  m.command = "simulate";
  m.config_path = config.string();
  m.output_dir = out;
  try {
    const std::string text = read_file(config);
    m.config_sha256 = sha256_hex(text);
    const Calibration cal = Calibration::from_json(nlohmann::json::parse(text));
    sim.validate();
    const Grid grid(cal);

    const CsvTable solution = read_csv(solve_dir / "solution.csv");
    const CsvTable distribution = read_csv(solve_dir / "distribution.csv");
    if (solution.rows.size() != grid.size() || distribution.rows.size() != grid.size()) {
      throw std::runtime_error("stored solve does not match the configured grid size");
    }
    const Vector k = solution.values("k");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!(std::abs(k[i] - grid[i]) <= 1e-9 * std::max(1.0, std::abs(grid[i])))) {
        throw std::runtime_error("stored solve grid differs from the configured grid");
      }
    }
    const ordered_json report = ordered_json::parse(read_file(solve_dir / "report.json"));
    if (!report.contains("provenance") || !report["provenance"].value("converged", false)) {
      throw std::runtime_error("stored solve did not converge");
    }

    PolicyTriple policy;
    DensityTriple density;
    for (Regime r : kRegimes) {
      const std::string s(to_string(r));
      policy.c[r] = solution.values("c_" + s);
      policy.mu[r] = solution.values("mu_" + s);
      density.g[r] = distribution.values("g_" + s);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(policy.c[r][i]) || !(policy.c[r][i] > 0.0) || !std::isfinite(density.g[r][i])) {
          throw std::runtime_error("stored solve has invalid policy or density values");
        }
      }
    }
    Mask flags(grid.size(), 0);
    const Vector flag_col = solution.values("signal_flag");
    for (std::size_t i = 0; i < grid.size(); ++i) flags[i] = flag_col[i] != 0.0 ? 1 : 0;
    const SignalRegion region = make_signal_region(std::move(flags), grid);

    fs::create_directories(out);
    const auto t0 = Clock::now();
    const EmpiricalDistribution emp = simulate(cal, policy, region, sim);
    m.timings.emplace_back("simulate", seconds_since(t0));
    const Comparison cmp = compare(emp, density, grid);
    emit(m, "mc_distribution.csv", mc_distribution_csv(grid, emp));
    emit(m, "mc_compare.json", mc_compare_json(cmp, emp, sim).dump(2) + "\n");
    write_manifest(m);
  } catch (const std::exception& e) {
    m.exit_code = kExitFailure;
    m.message = e.what();
  }
  return m;
}

unsigned workers_from_env(unsigned fallback) {
  const char* v = std::getenv("TWINPEAKS_WORKERS");
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) return fallback;
  return static_cast<unsigned>(n);
}

}  // namespace twinpeaks
