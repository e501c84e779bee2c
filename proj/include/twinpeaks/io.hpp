#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "twinpeaks/diagnostics.hpp"
#include "twinpeaks/hjb.hpp"
#include "twinpeaks/kfe.hpp"
#include "twinpeaks/mc.hpp"

namespace twinpeaks {

using ordered_json = nlohmann::ordered_json;

/// 12 significant digits, locale-independent; NaN prints as an empty field.
std::string format_number(double v);
/// Value rounded to 12 significant digits for JSON emission; non-finite values become null.
ordered_json json_number(double v);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

std::string solution_csv(const HjbSolution& sol);
std::string distribution_csv(const Grid& grid, const DensityTriple& density);
ordered_json shares_json(const DensityTriple& density, const Grid& grid);
ordered_json report_json(const HjbSolution& sol, const DensityTriple* density, const DiagnosticsReport* report,
                         const KfeSystem* kfe, std::string_view config_sha256);
std::string mc_distribution_csv(const Grid& grid, const EmpiricalDistribution& empirical);
ordered_json mc_compare_json(const Comparison& cmp, const EmpiricalDistribution& empirical, const SimConfig& config);

/// Minimal CSV reader for files written by this package (no quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
  /// Column parsed as numbers; empty fields read as NaN, anything unparsable throws.
  Vector values(std::string_view name) const;
  std::vector<std::string> text(std::string_view name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace twinpeaks
