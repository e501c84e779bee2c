#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "twinpeaks/run.hpp"

namespace {

int finish(const twinpeaks::RunManifest& m) {
  if (m.exit_code != twinpeaks::kExitOk) {
    std::cerr << "twinpeaks " << m.command << ": " << m.message << "\n";
  } else {
    std::cout << m.command << ": wrote " << m.files.size() << " files to " << m.output_dir.string() << "\n";
  }
  return m.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regime-switching savings model: HJB solve, stationary density, diagnostics"};
  app.require_subcommand(1);

  std::string config, out;

  auto* solve = app.add_subcommand("solve", "Solve HJB, KFE and diagnostics for one config");
  solve->add_option("--config", config, "Calibration JSON")->required();
  solve->add_option("--out", out, "Output directory")->required();

  std::string param;
  std::vector<double> values;
  unsigned workers = twinpeaks::workers_from_env(1);
  auto* sweep = app.add_subcommand("sweep", "Comparative statics over one calibration field");
  sweep->add_option("--config", config, "Base calibration JSON")->required();
  sweep->add_option("--out", out, "Output directory")->required();
  sweep->add_option("--param", param, "Calibration field to vary")->required();
  sweep->add_option("--values", values, "Values, comma or space separated")->required()->delimiter(',');
  sweep->add_option("--workers", workers, "Concurrent sub-runs (default TWINPEAKS_WORKERS or 1)")
      ->check(CLI::Range(1u, 1024u));

  std::string solve_dir, mode = "single-long-path";
  twinpeaks::SimConfig sim;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo check of a stored solve");
  simulate->add_option("--config", config, "Calibration JSON used for the solve")->required();
  simulate->add_option("--solve-dir", solve_dir, "Directory written by `solve`")->required();
  simulate->add_option("--out", out, "Output directory")->required();
  simulate->add_option("--paths", sim.n_paths, "Paths in ensemble mode")->capture_default_str();
  simulate->add_option("--horizon", sim.horizon, "Years per path")->capture_default_str();
  simulate->add_option("--dt", sim.dt_sim, "Euler-Maruyama step")->capture_default_str();
  simulate->add_option("--burn-in", sim.burn_in, "Years discarded before sampling")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "RNG seed")->capture_default_str();
  simulate->add_option("--mode", mode, "ensemble | single-long-path")->capture_default_str();
  simulate->add_option("--sample-interval", sim.sample_interval, "Years between samples")->capture_default_str();
  simulate->add_option("--workers", sim.workers, "Threads in ensemble mode")->check(CLI::Range(1u, 1024u));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : twinpeaks::kExitFailure;
  }

  try {
    if (*solve) return finish(twinpeaks::cmd_solve(config, out));
    if (*sweep) return finish(twinpeaks::cmd_sweep(config, param, values, out, workers));
    if (*simulate) {
      sim.mode = twinpeaks::parse_sim_mode(mode);
      if (simulate->count("--workers") == 0) sim.workers = twinpeaks::workers_from_env(1);
      return finish(twinpeaks::cmd_simulate(config, solve_dir, sim, out));
    }
  } catch (const std::exception& e) {
    std::cerr << "twinpeaks: " << e.what() << "\n";
    return twinpeaks::kExitFailure;
  }
  return twinpeaks::kExitFailure;
}
