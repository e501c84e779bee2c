#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>

#include "twinpeaks/diagnostics.hpp"
#include "twinpeaks/hjb.hpp"
#include "twinpeaks/io.hpp"
#include "twinpeaks/kfe.hpp"
#include "twinpeaks/mc.hpp"
#include "twinpeaks/run.hpp"

namespace py = pybind11;
using namespace py::literals;
using namespace twinpeaks;

namespace {

// Configs cross the boundary as JSON text; the Python side does the dict conversion.
Calibration calibration_from(const std::string& config_json) {
  Calibration cal = Calibration::from_json(nlohmann::json::parse(config_json.empty() ? "{}" : config_json));
  cal.validate();
  return cal;
}

template <class V>
py::array_t<double> to_array(const V& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  auto w = out.mutable_unchecked<1>();
  for (std::size_t i = 0; i < v.size(); ++i) w(static_cast<py::ssize_t>(i)) = static_cast<double>(v[i]);
  return out;
}

template <class T>
py::dict per_regime(const PerRegime<T>& p) {
  py::dict d;
  for (Regime r : kRegimes) d[py::str(std::string(to_string(r)))] = to_array(p[r]);
  return d;
}

struct Pipeline {
  HjbSolution sol;
  std::optional<KfeSystem> kfe;
  std::optional<DensityTriple> density;
  std::optional<DiagnosticsReport> report;
};

Pipeline run(const Calibration& cal) {
  Pipeline p{solve_hjb(cal), {}, {}, {}};
  if (!p.sol.report.converged) return p;
  p.kfe = assemble_kfe(p.sol);
  p.density = solve_stationary(*p.kfe, p.sol.grid, cal.normalization_row);
  p.report = diagnose(p.sol, *p.density);
  return p;
}

py::dict solve(const std::string& config_json) {
  const Calibration cal = calibration_from(config_json);
  std::optional<Pipeline> run_result;
  std::string report;
  {
    py::gil_scoped_release nogil;
    run_result.emplace(run(cal));
    const Pipeline& p = *run_result;
    report = report_json(p.sol, p.density ? &*p.density : nullptr, p.report ? &*p.report : nullptr,
                         p.kfe ? &*p.kfe : nullptr, "")
                 .dump();
  }
  const Pipeline& p = *run_result;
  py::dict out;
  out["k"] = to_array(p.sol.grid.nodes());
  out["V"] = per_regime(p.sol.V);
  out["c"] = per_regime(p.sol.policy.c);
  out["mu"] = per_regime(p.sol.policy.mu);
  out["signal_flag"] = to_array(p.sol.signal.flags);
  out["D"] = to_array(surplus(p.sol.V, cal, p.sol.grid));
  out["converged"] = p.sol.report.converged;
  out["iterations"] = p.sol.report.iterations;
  out["g"] = p.density ? py::object(per_regime(p.density->g)) : py::none();
  out["report_json"] = report;
  return out;
}

py::dict simulate_compare(const std::string& config_json, std::size_t n_paths, double horizon, double dt, double burn_in,
                  std::uint64_t seed, const std::string& mode, double sample_interval, unsigned workers) {
  const Calibration cal = calibration_from(config_json);
  SimConfig sim;
  sim.n_paths = n_paths;
  sim.horizon = horizon;
  sim.dt_sim = dt;
  sim.burn_in = burn_in;
  sim.seed = seed;
  sim.mode = parse_sim_mode(mode);
  sim.sample_interval = sample_interval;
  sim.workers = workers;
  std::string compare_text;
  {
    py::gil_scoped_release nogil;
    const Pipeline p = run(cal);
    if (!p.density) throw std::runtime_error("HJB solve did not converge");
    const EmpiricalDistribution emp = twinpeaks::simulate(cal, p.sol.policy, p.sol.signal, sim);
    compare_text = mc_compare_json(compare(emp, *p.density, p.sol.grid), emp, sim).dump();
  }
  return py::dict("compare_json"_a = compare_text);
}

double steady_state(const std::string& config_json, const std::string& regime) {
  const Calibration cal = calibration_from(config_json);
  if (regime == "L") return deterministic_steady_state(Regime::L, cal);
  if (regime == "H") return deterministic_steady_state(Regime::H, cal);
  throw py::value_error("regime must be 'L' or 'H'");
}

int exit_of(const RunManifest& m) { return m.exit_code; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "twinpeaks C++ core";

  m.def("default_config", [] { return Calibration{}.to_json().dump(); });
  m.def("solve", &solve, py::arg("config_json"));
  m.def("simulate", &simulate_compare, py::arg("config_json"), py::arg("n_paths"), py::arg("horizon"), py::arg("dt"),
        py::arg("burn_in"), py::arg("seed"), py::arg("mode"), py::arg("sample_interval"), py::arg("workers"));
  m.def("deterministic_steady_state", &steady_state, py::arg("config_json"), py::arg("regime"));

  // Same behaviour and exit codes as the command-line tool.
  m.def(
      "cli_solve",
      [](const std::filesystem::path& config, const std::filesystem::path& out) {
        py::gil_scoped_release nogil;
        return exit_of(cmd_solve(config, out));
      },
      py::arg("config"), py::arg("out"));
  m.def(
      "cli_sweep",
      [](const std::filesystem::path& config, const std::string& param, const std::vector<double>& values,
         const std::filesystem::path& out, unsigned workers) {
        py::gil_scoped_release nogil;
        return exit_of(cmd_sweep(config, param, values, out, workers));
      },
      py::arg("config"), py::arg("param"), py::arg("values"), py::arg("out"), py::arg("workers") = 1);
}
