#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "twinpeaks/calibration.hpp"
#include "twinpeaks/io.hpp"
#include "twinpeaks/mc.hpp"

namespace twinpeaks {

/// Process exit codes shared by all commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitNotConverged = 2;

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_sha256;
  std::filesystem::path output_dir;
  /// (file name relative to output_dir, SHA-256 of its content)
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<std::pair<std::string, double>> timings;
  std::optional<int> iterations;
  int exit_code = kExitOk;
  std::string message;

  ordered_json to_json() const;
};

/// Solve, forward equation and diagnostics for one configuration file.
RunManifest cmd_solve(const std::filesystem::path& config, const std::filesystem::path& out);

/// Same pipeline for an in-memory calibration; also writes config.json.
RunManifest solve_to_directory(const Calibration& cal, const std::filesystem::path& out,
                               const std::string& command = "solve");

/// One sub-directory per value, written atomically, plus sweep_summary.csv.
RunManifest cmd_sweep(const std::filesystem::path& config, const std::string& param, const std::vector<double>& values,
                      const std::filesystem::path& out, unsigned workers = 1);

/// Monte Carlo check of the stored solve in solve_dir.
RunManifest cmd_simulate(const std::filesystem::path& config, const std::filesystem::path& solve_dir,
                         const SimConfig& sim, const std::filesystem::path& out);

/// Worker count from TWINPEAKS_WORKERS, or fallback when unset or invalid.
unsigned workers_from_env(unsigned fallback = 1);

}  // namespace twinpeaks
