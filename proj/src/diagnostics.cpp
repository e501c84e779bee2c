#include "twinpeaks/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace twinpeaks {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double second_difference(std::span<const double> c, const Grid& grid, double k, double h) {
  return (interp_linear(c, k + h, grid) - 2.0 * interp_linear(c, k, grid) + interp_linear(c, k - h, grid)) / (h * h);
}

// Travel time along dk/dt = mu(k) from a to b (a < b); infinite if the drift stalls.
double travel_time(std::span<const double> mu, const Grid& grid, double a, double b) {
  if (!(b > a)) return 0.0;
  const double h = grid.dk() / 4.0;
  const auto steps = static_cast<std::size_t>(std::ceil((b - a) / h));
  const double step = (b - a) / static_cast<double>(steps);
  double t = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    const double m = interp_linear(mu, a + (static_cast<double>(s) + 0.5) * step, grid);
    if (!(m > 0.0)) return kInf;
    t += step / m;
  }
  return t;
}

double mass_where(std::span<const double> g, const Grid& grid, auto&& keep) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (keep(grid[i])) s += g[i];
  }
  return s * grid.dk();
}

}  // namespace

std::vector<double> find_attractors(std::span<const double> mu, const Grid& grid) {
  if (mu.size() != grid.size()) throw std::invalid_argument("find_attractors: drift length differs from grid");
  std::vector<double> roots;
  std::optional<std::size_t> last_positive;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] > 0.0) {
      last_positive = i;
    } else if (mu[i] < 0.0) {
      if (last_positive) {
        const std::size_t p = *last_positive;
        if (i == p + 1) {
          roots.push_back(grid[p] + (grid[i] - grid[p]) * mu[p] / (mu[p] - mu[i]));
        } else {
          // Zero-drift nodes in between: the upwind scheme parks the steady state there.
          roots.push_back(0.5 * (grid[p + 1] + grid[i - 1]));
        }
      }
      last_positive.reset();
    }
  }
  return roots;
}

Vector node_derivative(std::span<const double> c, const Grid& grid) {
  const std::size_t n = c.size();
  if (n != grid.size()) throw std::invalid_argument("node_derivative: vector length differs from grid");
  const double dk = grid.dk();
  Vector d(n);
  d[0] = (c[1] - c[0]) / dk;
  d[n - 1] = (c[n - 1] - c[n - 2]) / dk;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (c[i + 1] - c[i - 1]) / (2.0 * dk);
  return d;
}

double mpc(std::span<const double> c, const Grid& grid, double k) {
  return interp_linear(node_derivative(c, grid), k, grid);
}

double apc(std::span<const double> c, Regime r, const Calibration& cal, const Grid& grid, double k) {
  const double y = production(k, r, cal);
  if (!(y > 0.0)) throw std::domain_error("apc: output is zero");
  return interp_linear(c, k, grid) / y;
}

WeightedMpc weighted_mpc(const DensityTriple& density, const PolicyTriple& policy, const Grid& grid) {
  WeightedMpc out;
  double num_all = 0.0, den_all = 0.0;
  for (Regime r : kRegimes) {
    const Vector d = node_derivative(policy.c[r], grid);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      num += d[i] * density.g[r][i];
      den += density.g[r][i];
    }
    if (den > 0.0) out.by_regime[r] = num / den;
    num_all += num;
    den_all += den;
  }
  if (den_all > 0.0) out.aggregate = num_all / den_all;
  return out;
}

double gini(std::span<const double> weights, std::span<const double> nodes) {
  if (weights.size() != nodes.size()) throw std::invalid_argument("gini: weights and nodes differ in length");
  // Sorted nodes turn the double sum into one pass with running totals.
  double cum_w = 0.0, cum_wk = 0.0, pair_sum = 0.0, total_wk = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i > 0 && nodes[i] < nodes[i - 1]) throw std::invalid_argument("gini: nodes must be sorted");
    pair_sum += weights[i] * (nodes[i] * cum_w - cum_wk);
    cum_w += weights[i];
    cum_wk += weights[i] * nodes[i];
  }
  total_wk = cum_wk;
  if (!(total_wk > 0.0) || !(cum_w > 0.0)) throw std::domain_error("gini: mean wealth is zero");
  // pair_sum counts each unordered pair once; the full double sum is twice that.
  return pair_sum / (cum_w * total_wk);
}

double gini(std::span<const double> g, const Grid& grid) {
  Vector w(g.begin(), g.end());
  for (double& v : w) v *= grid.dk();
  return gini(w, grid.nodes());
}

double mean_wealth(std::span<const double> g, const Grid& grid) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += grid[i] * g[i];
  return s * grid.dk();
}

EulerTerms euler_decomposition(const PolicyTriple& policy, const Calibration& cal, const Grid& grid, double k,
                               Regime r, const SignalRegion* region) {
  const double dk = grid.dk();
  if (!(k - dk >= grid.front() && k + dk <= grid.back())) {
    throw std::domain_error("euler_decomposition: k must be interior");
  }
  const Vector& c = policy.c[r];
  const double c_here = interp_linear(c, k, grid);
  const double scale = 0.5 * cal.gamma * (cal.gamma + 1.0) * cal.sigma * cal.sigma / c_here;

  EulerTerms t;
  t.ramsey = marginal_product(k, r, cal) - cal.delta - cal.rho;
  t.precautionary = scale * second_difference(c, grid, k, dk);
  t.precautionary_lo = t.precautionary_hi = t.precautionary;
  for (double width : {2.0 * dk, 4.0 * dk}) {
    if (k - width < grid.front() || k + width > grid.back()) continue;
    const double v = scale * second_difference(c, grid, k, width);
    t.precautionary_lo = std::min(t.precautionary_lo, v);
    t.precautionary_hi = std::max(t.precautionary_hi, v);
  }

  const Regime other = r == Regime::L ? Regime::W : Regime::L;
  const double lambda_out = r == Regime::L ? cal.lambda_LH : cal.lambda_HL;
  const double ratio = marginal_utility(interp_linear(policy.c[other], k, grid), cal.gamma) /
                       marginal_utility(c_here, cal.gamma);
  t.switching = lambda_out * (ratio - 1.0);
  t.bracket_sum = t.ramsey + t.precautionary + t.switching;

  if (r == Regime::W && region && region->kstar_index) {
    t.reliable = std::abs(k - region->kstar) > 2.0 * dk;
  }
  return t;
}

double local_spread(std::span<const double> mu, const Grid& grid, double k, double sigma) {
  const double slope = interp_linear(node_derivative(mu, grid), k, grid);
  if (std::abs(slope) < 1e-8) return kInf;
  return sigma / std::sqrt(2.0 * std::abs(slope));
}

Separation separation_check(double kss_L, double kss_H, const PolicyTriple& policy, const Calibration& cal,
                            const Grid& grid) {
  Separation s;
  s.gap = kss_H - kss_L;
  s.sigma_ss_L = local_spread(policy.mu[Regime::L], grid, kss_L, cal.sigma);
  s.sigma_ss_H = local_spread(policy.mu[Regime::H], grid, kss_H, cal.sigma);
  const double spread = s.sigma_ss_L + s.sigma_ss_H;
  s.satisfied = std::isfinite(spread) && s.gap > cal.separation_factor * spread;
  return s;
}

std::vector<Peak> bimodality(std::span<const double> g, const Grid& grid, double fraction) {
  const std::size_t n = g.size();
  if (n != grid.size()) throw std::invalid_argument("bimodality: density length differs from grid");
  std::vector<Peak> peaks;
  if (n < 3) return peaks;
  const double gmax = *std::max_element(g.begin(), g.end());
  const double threshold = fraction * gmax;

  std::size_t i = 1;
  while (i + 1 < n) {
    if (!(g[i] > g[i - 1])) {
      ++i;
      continue;
    }
    // Walk across a plateau; it is a peak only if the value then drops.
    std::size_t j = i;
    while (j + 1 < n && g[j + 1] == g[i]) ++j;
    if (j + 1 >= n || !(g[j + 1] < g[i])) {
      i = j + 1;
      continue;
    }
    const double h = g[i];
    double left_base = h;
    for (std::size_t a = i; a-- > 0;) {
      if (g[a] > h) break;
      left_base = std::min(left_base, g[a]);
    }
    double right_base = h;
    for (std::size_t b = j + 1; b < n; ++b) {
      if (g[b] > h) break;
      right_base = std::min(right_base, g[b]);
    }
    const double prominence = h - std::max(left_base, right_base);
    if (prominence > threshold) peaks.push_back({grid[(i + j) / 2], h, prominence});
    i = j + 1;
  }
  return peaks;
}

Phenotypes phenotypes(const DensityTriple& density, const SignalRegion& region, const Calibration& cal,
                      const Grid& grid) {
  Phenotypes p;
  const Vector& gL = density.g[Regime::L];
  const double kstar = region.kstar;
  p.degenerate = !region.kstar_index.has_value();
  p.hand_to_mouth = mass_where(gL, grid, [](double k) { return k < kHandToMouthCutoff; });
  p.structurally_trapped =
      mass_where(gL, grid, [&](double k) { return k >= kHandToMouthCutoff && (p.degenerate || k <= kstar); });
  p.folded_residual = mass_where(gL, grid, [&](double k) { return k >= kHandToMouthCutoff && k <= cal.phi; });
  p.decaying_rentiers = p.degenerate ? 0.0 : mass_where(gL, grid, [&](double k) { return k > kstar; });
  p.frustrated_aspirants = density.share(Regime::W, grid.dk());
  p.successful_signalers = density.share(Regime::H, grid.dk());
  return p;
}

std::string_view to_string(RegimeClass c) {
  switch (c) {
    case RegimeClass::immediate: return "immediate";
    case RegimeClass::interior: return "interior";
    case RegimeClass::none: return "none";
  }
  return "?";
}

RegimeClass classify_regime(const SignalRegion& region, const Calibration& cal, const Grid& grid) {
  if (!region.kstar_index) return RegimeClass::none;
  return *region.kstar_index == grid.first_at_or_above(cal.phi) ? RegimeClass::immediate : RegimeClass::interior;
}

std::optional<double> principal_attractor(const std::vector<double>& roots, double benchmark) {
  if (roots.empty()) return std::nullopt;
  return *std::min_element(roots.begin(), roots.end(), [&](double a, double b) {
    return std::abs(a - benchmark) < std::abs(b - benchmark);
  });
}

DiagnosticsReport diagnose(const HjbSolution& sol, const DensityTriple& density) {
  const Calibration& cal = sol.cal;
  const Grid& grid = sol.grid;
  const double dk = grid.dk();
  DiagnosticsReport rep;

  rep.attractors_L = find_attractors(sol.policy.mu[Regime::L], grid);
  rep.attractors_H = find_attractors(sol.policy.mu[Regime::H], grid);
  rep.kss_L_det = deterministic_steady_state(Regime::L, cal);
  rep.kss_H_det = deterministic_steady_state(Regime::H, cal);
  rep.kss_L = principal_attractor(rep.attractors_L, rep.kss_L_det);
  rep.kss_H = principal_attractor(rep.attractors_H, rep.kss_H_det);
  rep.kstar = sol.signal.kstar;
  rep.regime_class = classify_regime(sol.signal, cal, grid);

  const std::size_t first_feasible = grid.first_at_or_above(cal.phi);
  if (first_feasible < grid.size()) rep.surplus_at_phi = surplus(sol.V, cal, grid)[first_feasible];
  const double sp = smooth_pasting_residual(sol);
  if (std::isfinite(sp)) rep.smooth_pasting = sp;

  for (Regime r : {Regime::L, Regime::H}) {
    const std::optional<double> kss = r == Regime::L ? rep.kss_L : rep.kss_H;
    if (!kss) continue;
    rep.mpc_at[r] = mpc(sol.policy.c[r], grid, *kss);
    rep.apc_at[r] = apc(sol.policy.c[r], r, cal, grid, *kss);
    rep.net_return_at[r] = marginal_product(*kss, r, cal) - cal.delta;
    if (*kss - dk >= grid.front() && *kss + dk <= grid.back()) {
      rep.euler_at[r] = euler_decomposition(sol.policy, cal, grid, *kss, r, &sol.signal);
    }
  }

  const Vector g = density.total();
  rep.weighted_mpc = weighted_mpc(density, sol.policy, grid);
  rep.gini = gini(g, grid);
  rep.mean_wealth = mean_wealth(g, grid);
  for (Regime r : kRegimes) rep.shares[r] = density.share(r, dk);
  if (rep.kss_L && rep.kss_H) rep.separation = separation_check(*rep.kss_L, *rep.kss_H, sol.policy, cal, grid);
  rep.peaks = bimodality(g, grid, cal.peak_prominence);
  rep.phenotypes = phenotypes(density, sol.signal, cal, grid);

  BimodalityConditions& c = rep.conditions;
  c.c1 = rep.attractors_L.size() == 1 && rep.attractors_H.size() == 1;
  c.c2 = rep.separation && rep.separation->satisfied;
  c.c3 = sol.signal.kstar_index.has_value();
  c.t_acc_H = kInf;
  c.t_acc_W = kInf;
  if (c.c3 && rep.kss_H && rep.separation) {
    c.t_acc_H = travel_time(sol.policy.mu[Regime::H], grid, sol.signal.kstar - cal.phi,
                            *rep.kss_H - rep.separation->sigma_ss_H);
  }
  if (c.c3 && rep.kss_L) c.t_acc_W = travel_time(sol.policy.mu[Regime::W], grid, *rep.kss_L, sol.signal.kstar);
  c.c4 = cal.lambda_HL * c.t_acc_H <= kSlowCouplingBound && cal.lambda_LH * c.t_acc_W <= kSlowCouplingBound;
  return rep;
}

}  // namespace twinpeaks
