#include "twinpeaks/mc.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

namespace twinpeaks {

namespace {

std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
  return std::mt19937_64(seq);
}

std::size_t nearest_node(double k, const Grid& grid) {
  const Grid::Cell cell = grid.locate(k);
  return cell.weight >= 0.5 ? cell.lower + 1 : cell.lower;
}

EmpiricalDistribution empty_distribution(std::size_t n) {
  EmpiricalDistribution d;
  for (Regime r : kRegimes) d.counts[r].assign(n, 0);
  return d;
}

struct PathContext {
  const Calibration& cal;
  const PolicyTriple& policy;
  const SignalRegion& region;
  const SimConfig& config;
  const Grid& grid;
  std::uint64_t total_steps;
  std::uint64_t burn_steps;
  std::uint64_t stride;
};

EmpiricalDistribution run_path(const PathContext& ctx, std::uint64_t path) {
  const Calibration& cal = ctx.cal;
  const Grid& grid = ctx.grid;
  const double dt = ctx.config.dt_sim;
  const double shock = cal.sigma * std::sqrt(dt);
  const double p_LH = cal.lambda_LH * dt;
  const double p_HL = cal.lambda_HL * dt;
  const double kstar = ctx.region.kstar;

  std::mt19937_64 rng = path_engine(ctx.config.seed, path);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  EmpiricalDistribution out = empty_distribution(grid.size());
  double k = std::isnan(ctx.config.start_k) ? deterministic_steady_state(Regime::L, cal) : ctx.config.start_k;
  k = std::clamp(k, grid.front(), grid.back());
  Regime s = ctx.config.start_regime;

  for (std::uint64_t step = 0; step < ctx.total_steps; ++step) {
    // Exercise is checked first, so a W agent never diffuses from above k*.
    if (s == Regime::W && k >= kstar) {
      s = Regime::H;
      k = std::max(k - cal.phi, grid.front());
      ++out.transitions.W_to_H;
    }

    if (step >= ctx.burn_steps && (step - ctx.burn_steps) % ctx.stride == 0) {
      ++out.counts[s][nearest_node(k, grid)];
      ++out.samples;
      if (s == Regime::W && k >= kstar) ++out.w_samples_above_kstar;
    }

    out.occupancy[s] += dt;
    const double c = interp_linear(ctx.policy.c[s], k, grid);
    const double mu = production(k, s, cal) - c - cal.delta * k;
    k += mu * dt + shock * normal(rng);
    if (k < grid.front()) k = 2.0 * grid.front() - k;
    if (k > grid.back()) {
      if (ctx.config.reflect_upper) {
        k = 2.0 * grid.back() - k;
      } else {
        k = grid.back();
        ++out.excursions;
      }
    }
    k = std::clamp(k, grid.front(), grid.back());

    const double u = uniform(rng);
    switch (s) {
      case Regime::L:
        if (u < p_LH) {
          s = Regime::W;
          ++out.transitions.L_to_W;
        }
        break;
      case Regime::W:
        if (u < p_HL) {
          s = Regime::L;
          ++out.transitions.W_to_L;
        }
        break;
      case Regime::H:
        if (u < p_HL) {
          s = Regime::L;
          ++out.transitions.H_to_L;
        }
        break;
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(SimMode m) { return m == SimMode::ensemble ? "ensemble" : "single-long-path"; }

SimMode parse_sim_mode(std::string_view text) {
  if (text == "ensemble") return SimMode::ensemble;
  if (text == "single-long-path" || text == "single") return SimMode::single_long_path;
  throw std::invalid_argument("unknown simulation mode: " + std::string(text));
}

void SimConfig::validate() const {
  if (!(dt_sim > 0.0 && dt_sim <= 0.1)) throw std::invalid_argument("dt_sim must lie in (0, 0.1]");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (!(burn_in >= 0.0 && burn_in < horizon)) throw std::invalid_argument("burn_in must lie in [0, horizon)");
  if (n_paths < 1) throw std::invalid_argument("at least one path is required");
  if (!(sample_interval >= dt_sim)) throw std::invalid_argument("sample_interval must be at least dt_sim");
}

double EmpiricalDistribution::share(Regime r) const {
  if (samples == 0) return 0.0;
  std::uint64_t s = 0;
  for (auto c : counts[r]) s += c;
  return static_cast<double>(s) / static_cast<double>(samples);
}

Vector EmpiricalDistribution::mass(Regime r) const {
  Vector m(counts[r].size(), 0.0);
  if (samples == 0) return m;
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<double>(counts[r][i]) / static_cast<double>(samples);
  return m;
}

Vector EmpiricalDistribution::total_mass() const {
  Vector m(counts[Regime::L].size(), 0.0);
  if (samples == 0) return m;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::uint64_t c = counts[Regime::L][i] + counts[Regime::W][i] + counts[Regime::H][i];
    m[i] = static_cast<double>(c) / static_cast<double>(samples);
  }
  return m;
}

double EmpiricalDistribution::mean(const Grid& grid) const {
  const Vector m = total_mass();
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += grid[i] * m[i];
  return s;
}

void EmpiricalDistribution::merge(const EmpiricalDistribution& other) {
  for (Regime r : kRegimes) {
    if (counts[r].empty()) counts[r].assign(other.counts[r].size(), 0);
    for (std::size_t i = 0; i < counts[r].size(); ++i) counts[r][i] += other.counts[r][i];
    occupancy[r] += other.occupancy[r];
  }
  samples += other.samples;
  excursions += other.excursions;
  w_samples_above_kstar += other.w_samples_above_kstar;
  transitions.L_to_W += other.transitions.L_to_W;
  transitions.W_to_L += other.transitions.W_to_L;
  transitions.W_to_H += other.transitions.W_to_H;
  transitions.H_to_L += other.transitions.H_to_L;
}

EmpiricalDistribution simulate(const Calibration& cal, const PolicyTriple& policy, const SignalRegion& region,
                               const SimConfig& config) {
  config.validate();
  const Grid grid(cal);
  for (Regime r : kRegimes) {
    if (policy.c[r].size() != grid.size()) throw std::invalid_argument("simulate: policy length differs from grid");
  }
  if (region.flags.size() != grid.size()) throw std::invalid_argument("simulate: signal flags differ from grid");

  const auto steps_of = [&](double years) { return static_cast<std::uint64_t>(std::llround(years / config.dt_sim)); };
  const PathContext ctx{cal,
                        policy,
                        region,
                        config,
                        grid,
                        steps_of(config.horizon),
                        steps_of(config.burn_in),
                        std::max<std::uint64_t>(1, steps_of(config.sample_interval))};

  const std::size_t paths = config.paths();
  std::vector<EmpiricalDistribution> per_path(paths);
  const unsigned workers = std::max(1u, std::min<unsigned>(config.workers, static_cast<unsigned>(paths)));
  if (workers == 1) {
    for (std::size_t p = 0; p < paths; ++p) per_path[p] = run_path(ctx, p);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t p = w; p < paths; p += workers) per_path[p] = run_path(ctx, p);
      });
    }
    for (auto& t : pool) t.join();
  }

  // Merge in path order so floating-point sums do not depend on scheduling.
  EmpiricalDistribution out = empty_distribution(grid.size());
  for (const auto& d : per_path) out.merge(d);
  return out;
}

Comparison compare(const EmpiricalDistribution& empirical, const DensityTriple& density, const Grid& grid) {
  const double dk = grid.dk();
  Comparison cmp;
  for (Regime r : kRegimes) {
    cmp.share_gaps[r] = empirical.share(r) - density.share(r, dk);
    cmp.max_share_gap = std::max(cmp.max_share_gap, std::abs(cmp.share_gaps[r]));
  }
  const Vector emp = empirical.total_mass();
  const Vector g = density.total();
  double mean_kfe = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    cmp.l1_distance += std::abs(emp[i] - g[i] * dk);
    mean_kfe += grid[i] * g[i] * dk;
  }
  cmp.mean_empirical = empirical.mean(grid);
  cmp.mean_kfe = mean_kfe;
  cmp.mean_gap = cmp.mean_empirical - cmp.mean_kfe;
  return cmp;
}

DensityTriple as_density(const EmpiricalDistribution& empirical, const Grid& grid) {
  DensityTriple d;
  for (Regime r : kRegimes) {
    d.g[r] = empirical.mass(r);
    for (double& v : d.g[r]) v /= grid.dk();
  }
  return d;
}

}  // namespace twinpeaks
