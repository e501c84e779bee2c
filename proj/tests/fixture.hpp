#pragma once

#include "twinpeaks/diagnostics.hpp"
#include "twinpeaks/hjb.hpp"
#include "twinpeaks/kfe.hpp"

namespace fixture {

struct Solved {
  twinpeaks::HjbSolution sol;
  twinpeaks::KfeSystem kfe;
  twinpeaks::DensityTriple density;
  twinpeaks::DiagnosticsReport report;
};

inline Solved solve_all(const twinpeaks::Calibration& cal) {
  auto sol = twinpeaks::solve_hjb(cal);
  auto kfe = twinpeaks::assemble_kfe(sol);
  auto density = twinpeaks::solve_stationary(kfe, sol.grid, cal.normalization_row);
  auto report = twinpeaks::diagnose(sol, density);
  return {std::move(sol), std::move(kfe), std::move(density), std::move(report)};
}

// Baseline at N = 501, solved once per test binary.
inline const Solved& baseline() {
  static const Solved s = solve_all(twinpeaks::Calibration{});
  return s;
}

inline const Solved& baseline_fine() {
  static const Solved s = [] {
    twinpeaks::Calibration cal;
    cal.N = 1001;
    return solve_all(cal);
  }();
  return s;
}

}  // namespace fixture
