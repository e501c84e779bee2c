#include "twinpeaks/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace twinpeaks {

namespace {

constexpr int kMaxActiveSetSweeps = 100;

Vector utility_flow(std::span<const double> c, double gamma) {
  Vector u(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) u[i] = utility(c[i], gamma);
  return u;
}

Vector scaled(std::span<const double> v, double s) {
  Vector out(v.begin(), v.end());
  for (double& x : out) x *= s;
  return out;
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void require_m_matrix(const Tridiagonal& m, SolveReport* report) {
  if (report) ++report->m_matrix_checks;
  if (!is_m_matrix(m)) throw std::runtime_error("HJB system matrix is not an M-matrix");
}

// W step as a discrete obstacle problem min(A V - b, V - psi) = 0, solved by policy
// iteration on the exercise set. Exercised rows become identity rows pinned to psi.
struct ObstacleStep {
  Vector V;
  Mask active;
  int sweeps = 0;
  bool settled = false;
};

ObstacleStep solve_obstacle(const Tridiagonal& A, std::span<const double> b, std::span<const double> psi,
                            const Mask& eligible, Mask active, SolveReport* report) {
  const std::size_t n = A.size();
  ObstacleStep out;
  for (int sweep = 1; sweep <= kMaxActiveSetSweeps; ++sweep) {
    Tridiagonal pinned = A;
    Vector rhs(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      pinned.diag[i] = 1.0;
      pinned.sub[i] = 0.0;
      pinned.sup[i] = 0.0;
      rhs[i] = psi[i];
    }
    require_m_matrix(pinned, report);
    out.V = pinned.solve(rhs);
    out.sweeps = sweep;

    const Vector AV = A.multiply(out.V);
    Mask next(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!eligible[i]) continue;
      const double residual = AV[i] - b[i];
      next[i] = (out.V[i] - psi[i] < residual) ? 1 : 0;
    }
    if (next == active) {
      out.settled = true;
      break;
    }
    active = std::move(next);
  }
  out.active = std::move(active);
  return out;
}

}  // namespace

std::string_view to_string(UpwindCase c) {
  switch (c) {
    case UpwindCase::forward: return "forward";
    case UpwindCase::backward: return "backward";
    case UpwindCase::zero_drift: return "zero-drift";
  }
  return "?";
}

UpwindChoice upwind_slope(std::span<const double> V, std::size_t i, Regime r, const Calibration& cal,
                          const Grid& grid) {
  const std::size_t n = V.size();
  if (n != grid.size() || i >= n) throw std::out_of_range("upwind_slope: index outside the grid");
  const double k = grid[i];
  const double dk = grid.dk();
  const double f = production(k, r, cal);

  if (i + 1 < n) {
    const double slope = (V[i + 1] - V[i]) / dk;
    if (slope > 0.0) {
      const double c = marginal_utility_inverse(slope, cal.gamma);
      const double mu = f - c - cal.delta * k;
      if (mu > 0.0) return {slope, c, mu, UpwindCase::forward};
    }
  }
  if (i > 0) {
    const double slope = (V[i] - V[i - 1]) / dk;
    if (slope > 0.0) {
      const double c = marginal_utility_inverse(slope, cal.gamma);
      const double mu = f - c - cal.delta * k;
      if (mu < 0.0) return {slope, c, mu, UpwindCase::backward};
    }
  }
  // Drift is set to exactly zero; recomputing f - c - delta k leaves rounding noise that
  // the attractor search would read as sign changes.
  const double c = f - cal.delta * k;
  return {marginal_utility(c, cal.gamma), c, 0.0, UpwindCase::zero_drift};
}

Policy extract_policy(std::span<const double> V, Regime r, const Calibration& cal, const Grid& grid) {
  const std::size_t n = grid.size();
  Policy p{Vector(n), Vector(n)};
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const UpwindChoice choice = upwind_slope(V, i, r, cal, grid);
    p.c[i] = choice.c;
    p.mu[i] = choice.mu;
  }
  p.c[n - 1] = zero_drift_consumption(grid.back(), r, cal);
  p.mu[n - 1] = 0.0;
  return p;
}

UpwindCoeffs assemble_coeffs(std::span<const double> mu, double sigma, double dk) {
  const std::size_t n = mu.size();
  const double diffusion = 0.5 * sigma * sigma / (dk * dk);
  UpwindCoeffs out{Vector(n), Vector(n), Vector(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.x[i] = std::max(mu[i], 0.0) / dk + diffusion;
    out.y[i] = -std::min(mu[i], 0.0) / dk + diffusion;
  }
  out.y[0] = 0.0;
  out.x[n - 1] = 0.0;
  for (std::size_t i = 0; i < n; ++i) out.z[i] = -(out.x[i] + out.y[i]);
  return out;
}

UpwindCoeffs assemble_coeffs(std::span<const double> mu, const Calibration& cal, const Grid& grid) {
  if (mu.size() != grid.size()) throw std::invalid_argument("assemble_coeffs: drift length differs from grid");
  return assemble_coeffs(mu, cal.sigma, grid.dk());
}

Tridiagonal generator_matrix(const UpwindCoeffs& coeffs) {
  const std::size_t n = coeffs.z.size();
  Tridiagonal g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.sub[i] = i > 0 ? coeffs.y[i] : 0.0;
    g.diag[i] = coeffs.z[i];
    g.sup[i] = i + 1 < n ? coeffs.x[i] : 0.0;
  }
  return g;
}

Tridiagonal implicit_system(const UpwindCoeffs& coeffs, double rho, double lambda_out, double dt) {
  const std::size_t n = coeffs.z.size();
  const double shift = 1.0 / dt + rho + lambda_out;
  Tridiagonal m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.sub[i] = i > 0 ? -coeffs.y[i] : 0.0;
    m.diag[i] = shift - coeffs.z[i];
    m.sup[i] = i + 1 < n ? -coeffs.x[i] : 0.0;
  }
  return m;
}

bool is_m_matrix(const Tridiagonal& m) {
  const std::size_t n = m.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = i > 0 ? m.sub[i] : 0.0;
    const double hi = i + 1 < n ? m.sup[i] : 0.0;
    if (!(m.diag[i] > 0.0) || lo > 0.0 || hi > 0.0) return false;
    if (!(m.diag[i] > std::abs(lo) + std::abs(hi))) return false;
  }
  return true;
}

Vector implicit_update(std::span<const double> V_prev, const UpwindCoeffs& coeffs, std::span<const double> u_vec,
                       double lambda_out, std::span<const double> inflow, const Calibration& cal, double dt) {
  const std::size_t n = V_prev.size();
  if (coeffs.z.size() != n || u_vec.size() != n || inflow.size() != n) {
    throw std::invalid_argument("implicit_update: vector lengths differ");
  }
  const Tridiagonal m = implicit_system(coeffs, cal.rho, lambda_out, dt);
  if (!is_m_matrix(m)) throw std::runtime_error("HJB system matrix is not an M-matrix");
  Vector rhs(n);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = V_prev[i] / dt + u_vec[i] + inflow[i];
  return m.solve(rhs);
}

Vector implicit_update(std::span<const double> V_prev, const UpwindCoeffs& coeffs, std::span<const double> u_vec,
                       double lambda_out, std::span<const double> inflow, const Calibration& cal) {
  return implicit_update(V_prev, coeffs, u_vec, lambda_out, inflow, cal, cal.dt);
}

double interp_linear(std::span<const double> values, double k, const Grid& grid, bool* clipped) {
  if (values.size() != grid.size()) throw std::invalid_argument("interp_linear: vector length differs from grid");
  const Grid::Cell cell = grid.locate(k);
  if (clipped) *clipped = cell.clipped;
  const double lo = values[cell.lower];
  if (cell.weight == 0.0) {
    if (std::isnan(lo)) throw std::invalid_argument("interp_linear: NaN value");
    return lo;
  }
  const double hi = values[cell.lower + 1];
  if (std::isnan(lo) || std::isnan(hi)) throw std::invalid_argument("interp_linear: NaN value");
  return lo + cell.weight * (hi - lo);
}

std::size_t SignalRegion::count() const noexcept {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
}

SignalRegion make_signal_region(Mask flags, const Grid& grid, std::size_t clipped) {
  SignalRegion region;
  region.flags = std::move(flags);
  region.clipped = clipped;
  for (std::size_t i = 0; i < region.flags.size(); ++i) {
    if (region.flags[i]) {
      region.kstar_index = i;
      region.kstar = grid[i];
      break;
    }
  }
  return region;
}

Vector exercise_payoff(std::span<const double> V_H, const Calibration& cal, const Grid& grid, std::size_t* clipped) {
  const std::size_t n = grid.size();
  Vector psi(n, std::numeric_limits<double>::quiet_NaN());
  std::size_t clips = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (grid[i] < cal.phi) continue;
    bool clip = false;
    psi[i] = interp_linear(V_H, grid[i] - cal.phi, grid, &clip);
    clips += clip ? 1 : 0;
  }
  if (clipped) *clipped = clips;
  return psi;
}

Projection american_projection(std::span<const double> V_W, std::span<const double> V_H, const Calibration& cal,
                               const Grid& grid) {
  std::size_t clipped = 0;
  const Vector psi = exercise_payoff(V_H, cal, grid, &clipped);
  Projection out{Vector(V_W.begin(), V_W.end()), {}};
  Mask flags(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::isnan(psi[i]) || !(psi[i] > V_W[i])) continue;
    out.V_W[i] = psi[i];
    flags[i] = 1;
  }
  out.region = make_signal_region(std::move(flags), grid, clipped);
  return out;
}

WPolicy recompute_w_policy(std::span<const double> V_W, std::span<const double> c_H, std::span<const double> mu_H,
                           const SignalRegion& region, const Calibration& cal, const Grid& grid) {
  Policy p = extract_policy(V_W, Regime::W, cal, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!region.flags[i]) continue;
    const double target = grid[i] - cal.phi;
    p.c[i] = interp_linear(c_H, target, grid);
    p.mu[i] = interp_linear(mu_H, target, grid);
  }
  UpwindCoeffs coeffs = assemble_coeffs(p.mu, cal, grid);
  return {std::move(p.c), std::move(p.mu), std::move(coeffs)};
}

HjbSolution solve_hjb(const Calibration& cal) {
  cal.validate();
  const Grid grid(cal);
  const std::size_t n = grid.size();

  ValueTriple V;
  for (Regime r : kRegimes) {
    V[r].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      V[r][i] = utility(zero_drift_consumption(grid[i], r, cal), cal.gamma) / cal.rho;
    }
  }

  SolveReport report;
  report.w_step = cal.w_step;
  SignalRegion region = make_signal_region(Mask(n, 0), grid);

  Mask eligible(n, 0);
  for (std::size_t i = 0; i < n; ++i) eligible[i] = grid[i] >= cal.phi ? 1 : 0;

  for (int it = 1; it <= cal.max_iter; ++it) {
    const double dt = cal.step_size(it);
    ValueTriple next;

    // L: loses the opportunity-free state at rate lambda_LH, gaining V_W from the last iterate.
    {
      const Policy p = extract_policy(V[Regime::L], Regime::L, cal, grid);
      const UpwindCoeffs co = assemble_coeffs(p.mu, cal, grid);
      ++report.m_matrix_checks;
      next[Regime::L] = implicit_update(V[Regime::L], co, utility_flow(p.c, cal.gamma), cal.lambda_LH,
                                        scaled(V[Regime::W], cal.lambda_LH), cal, dt);
    }

    // W: obsolescence back to L at rate lambda_HL, plus the exercise option into H.
    {
      std::size_t clipped = 0;
      const Vector psi = exercise_payoff(V[Regime::H], cal, grid, &clipped);
      // Continuation policy from the previous W iterate at every node. The inherited H policy
      // on exercise nodes only describes where mass goes after exercise, so it enters the
      // forward equation but not the continuation value.
      const Policy p = extract_policy(V[Regime::W], Regime::W, cal, grid);
      const UpwindCoeffs co = assemble_coeffs(p.mu, cal, grid);
      const Vector u = utility_flow(p.c, cal.gamma);
      const Vector inflow = scaled(next[Regime::L], cal.lambda_HL);

      if (cal.w_step == WStepMode::complementarity) {
        const Tridiagonal A = implicit_system(co, cal.rho, cal.lambda_HL, dt);
        Vector b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = V[Regime::W][i] / dt + u[i] + inflow[i];
        Mask active(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
          active[i] = eligible[i] && (region.flags[i] || psi[i] > V[Regime::W][i]) ? 1 : 0;
        }
        ObstacleStep step = solve_obstacle(A, b, psi, eligible, std::move(active), &report);
        report.max_active_set_sweeps = std::max(report.max_active_set_sweeps, step.sweeps);
        if (!step.settled) ++report.unsettled_active_sets;
        next[Regime::W] = std::move(step.V);
        region = make_signal_region(std::move(step.active), grid, clipped);
      } else {
        ++report.m_matrix_checks;
        const Vector plain = implicit_update(V[Regime::W], co, u, cal.lambda_HL, inflow, cal, dt);
        Mask flags(n, 0);
        next[Regime::W] = plain;
        for (std::size_t i = 0; i < n; ++i) {
          if (eligible[i] && psi[i] > plain[i]) {
            next[Regime::W][i] = psi[i];
            flags[i] = 1;
          }
        }
        region = make_signal_region(std::move(flags), grid, clipped);
      }
    }

    // H: falls back to L at rate lambda_HL, using the L iterate from this sweep.
    {
      const Policy p_h = extract_policy(V[Regime::H], Regime::H, cal, grid);
      const UpwindCoeffs co = assemble_coeffs(p_h.mu, cal, grid);
      ++report.m_matrix_checks;
      next[Regime::H] = implicit_update(V[Regime::H], co, utility_flow(p_h.c, cal.gamma), cal.lambda_HL,
                                        scaled(next[Regime::L], cal.lambda_HL), cal, dt);
    }

    double err = 0.0;
    for (Regime r : kRegimes) err = std::max(err, sup_distance(next[r], V[r]));
    V = std::move(next);
    report.iterations = it;
    report.errors.push_back(err);
    if (err < cal.tol) {
      report.converged = true;
      break;
    }
  }

  HjbSolution sol{cal, grid, std::move(V), {}, std::move(region), {}, std::move(report)};
  for (Regime r : {Regime::L, Regime::H}) {
    Policy p = extract_policy(sol.V[r], r, cal, grid);
    sol.policy.c[r] = std::move(p.c);
    sol.policy.mu[r] = std::move(p.mu);
    sol.coeffs[r] = assemble_coeffs(sol.policy.mu[r], cal, grid);
  }
  WPolicy w = recompute_w_policy(sol.V[Regime::W], sol.policy.c[Regime::H], sol.policy.mu[Regime::H], sol.signal,
                                 cal, grid);
  sol.policy.c[Regime::W] = std::move(w.c);
  sol.policy.mu[Regime::W] = std::move(w.mu);
  sol.coeffs[Regime::W] = std::move(w.coeffs);
  return sol;
}

Vector surplus(const ValueTriple& V, const Calibration& cal, const Grid& grid) {
  Vector D = exercise_payoff(V[Regime::H], cal, grid);
  for (std::size_t i = 0; i < D.size(); ++i) {
    if (!std::isnan(D[i])) D[i] = V[Regime::W][i] - D[i];
  }
  return D;
}

double smooth_pasting_residual(const HjbSolution& sol) {
  if (!sol.signal.kstar_index || *sol.signal.kstar_index == 0) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t s = *sol.signal.kstar_index;
  const double dk = sol.grid.dk();
  const Vector& VW = sol.V[Regime::W];
  const double target = sol.signal.kstar - sol.cal.phi;
  const double slope_w = (VW[s] - VW[s - 1]) / dk;
  const double slope_h = (interp_linear(sol.V[Regime::H], target, sol.grid) -
                          interp_linear(sol.V[Regime::H], target - dk, sol.grid)) /
                         dk;
  return std::abs(slope_w - slope_h);
}

}  // namespace twinpeaks
