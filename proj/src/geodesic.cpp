#include "epdiff/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "epdiff/commutator_lab.hpp"
#include "epdiff/conjugation.hpp"
#include "epdiff/errors.hpp"
#include "epdiff/field_io.hpp"

namespace epdiff {

namespace {

void check_velocity(const SpectralField& u, const SpectralOperator& a) {
  const TorusGrid& g = a.grid();
  if (u.grid() != g) throw GridMismatch();
  if (u.components() != g.dim() || a.components() != g.dim()) {
    throw ShapeMismatch("velocity and inertia operator need d components");
  }
}

// (∇u)^T m + (div u) m
SpectralField stretch_terms(const SpectralField& u, const SpectralField& m) {
  const TorusGrid& g = u.grid();
  const int d = g.dim();
  SpectralField out(g, d);
  SpectralField div(g, 1);
  for (int j = 0; j < d; ++j) div += partial_derivative(u.component(j), j);
  for (int i = 0; i < d; ++i) {
    SpectralField comp = pointwise_multiply(div, m.component(i));
    for (int j = 0; j < d; ++j) {
      comp += pointwise_multiply(partial_derivative(u.component(j), i), m.component(j));
    }
    std::ranges::copy(comp.component_span(0), out.component_span(i).begin());
  }
  return out;
}

double linf(const SpectralField& u) {
  double m = 0.0;
  for (double x : u.samples()) m = std::max(m, std::abs(x));
  return m;
}

struct LagState {
  SpectralField f;
  SpectralField v;
};

LagState operator+(const LagState& a, const LagState& b) { return {a.f + b.f, a.v + b.v}; }
LagState operator*(double s, const LagState& a) { return {s * a.f, s * a.v}; }

template <class State, class Rhs>
State rk4_step(const State& y, double dt, Rhs&& f) {
  const State k1 = f(y);
  const State k2 = f(y + (0.5 * dt) * k1);
  const State k3 = f(y + (0.5 * dt) * k2);
  const State k4 = f(y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <class State, class Rhs>
State midpoint_step(const State& y, double dt, Rhs&& f) {
  return y + dt * f(y + (0.5 * dt) * f(y));
}

template <class State, class Rhs>
State step(Integrator kind, const State& y, double dt, Rhs&& f) {
  return kind == Integrator::rk4 ? rk4_step(y, dt, f) : midpoint_step(y, dt, f);
}

double l2_distance(const SpectralField& a, const SpectralField& b) { return sobolev_norm(a - b, 0.0); }

Diagnostics diagnose(double t, const SpectralField& u, const SpectralOperator& a, double q, double residual) {
  Diagnostics d;
  d.t = t;
  d.energy = kinetic_energy(u, a);
  d.momentum_int = momentum_integral(u, a);
  d.hq_norm = sobolev_norm(u, q);
  d.linf_u = linf(u);
  d.step_residual = residual;
  return d;
}

// Guard state shared by both integrators.
struct Guard {
  const SolverConfig& cfg;
  double initial_hq = 0.0;
  std::vector<double> history;

  void check(double t, const SpectralField& u) {
    const double hq = sobolev_norm(u, cfg.diagnostic_q());
    history.push_back(hq);
    if (!std::isfinite(hq) || (initial_hq > 0.0 && hq > cfg.growth_limit * initial_hq)) {
      throw BlowUpSuspected("H^q norm exceeded the growth limit", t, history);
    }
    const double spacing = 1.0 / cfg.grid.n();
    if (cfg.dt * linf(u) > cfg.cfl_limit * spacing) {
      throw BlowUpSuspected("dt·max|u| exceeded the CFL-style limit", t, history);
    }
  }
};

}  // namespace

void SolverConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("dt must be positive");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw InvalidParameter("t_end must be positive");
  if (dt > t_end) throw InvalidParameter("dt must not exceed t_end");
  if (cadence < 1) throw InvalidParameter("cadence must be at least 1");
  if (!(growth_limit > 1.0)) throw InvalidParameter("growth_limit must exceed 1");
  if (!(cfl_limit > 0.0)) throw InvalidParameter("cfl_limit must be positive");
  if (q && !(*q >= 0.0)) throw InvalidParameter("q must be non-negative");
  if (inertia.dim != grid.dim()) throw InvalidParameter("inertia dimension does not match the grid");
  if (inertia.components != grid.dim()) throw InvalidParameter("inertia must act on d-component fields");
  if (inertia.order < 1.0) throw InvalidParameter("inertia order 2s must satisfy s >= 1/2");
  const auto rep = validate_symbol(inertia, inertia.order, grid);
  if (!rep.positive) throw InvalidParameter("inertia symbol is not positive definite");
  if (!rep.elliptic) throw InvalidParameter("inertia symbol is not elliptic");
}

double SolverConfig::diagnostic_q() const {
  if (q) return *q;
  return std::max(inertia.order, grid.dim() / 2.0 + 1.1);
}

int SolverConfig::steps() const { return static_cast<int>(std::ceil(t_end / dt - 1e-9)); }

SpectralField momentum(const SpectralField& u, const SpectralOperator& a) {
  check_velocity(u, a);
  return a.apply(u);
}

SpectralField euler_arnold_rhs(const SpectralField& u, const SpectralOperator& a) {
  const SpectralField m = momentum(u, a);
  const SpectralField force = covariant_derivative(u, m) + stretch_terms(u, m);
  return -a.solve(force);
}

SpectralField spray(const SpectralField& u, const SpectralOperator& a) {
  const SpectralField m = momentum(u, a);
  const SpectralField bracket = a.apply(covariant_derivative(u, u)) - covariant_derivative(u, m);
  return a.solve(bracket - stretch_terms(u, m));
}

double kinetic_energy(const SpectralField& u, const SpectralOperator& a) {
  return 0.5 * l2_inner(momentum(u, a), u);
}

std::vector<double> momentum_integral(const SpectralField& u, const SpectralOperator& a) {
  const SpectralField m = momentum(u, a);
  std::vector<double> out;
  const std::size_t zero = u.grid().index_of({0, 0});
  for (int c = 0; c < m.components(); ++c) out.push_back(m.at(c, zero).real());
  return out;
}

std::string GeodesicTrajectory::to_csv() const {
  std::ostringstream os;
  const std::size_t d = diagnostics.empty() ? 1 : diagnostics.front().momentum_int.size();
  os << "t,energy";
  for (std::size_t c = 0; c < d; ++c) os << ",momentum_int_" << c + 1;
  os << ",hq_norm,linf_u,step_residual\n";
  for (const auto& r : diagnostics) {
    os << format_double(r.t) << ',' << format_double(r.energy);
    for (double m : r.momentum_int) os << ',' << format_double(m);
    os << ',' << format_double(r.hq_norm) << ',' << format_double(r.linf_u) << ','
       << format_double(r.step_residual) << '\n';
  }
  return os.str();
}

GeodesicTrajectory integrate_eulerian(const SpectralField& u0, const SolverConfig& cfg) {
  cfg.validate();
  const SpectralOperator a = realize(cfg.inertia, cfg.grid);
  check_velocity(u0, a);
  const int n = cfg.steps();
  const double dt = cfg.t_end / n;
  const double q = cfg.diagnostic_q();
  const auto rhs = [&a](const SpectralField& u) { return euler_arnold_rhs(u, a); };
  const Integrator other = cfg.integrator == Integrator::rk4 ? Integrator::midpoint : Integrator::rk4;

  GeodesicTrajectory traj;
  traj.states.push_back({0.0, u0, std::nullopt, std::nullopt});
  traj.diagnostics.push_back(diagnose(0.0, u0, a, q, 0.0));
  Guard guard{cfg, sobolev_norm(u0, q), {}};
  SpectralField u = u0;
  for (int i = 1; i <= n; ++i) {
    const SpectralField prev = u;
    u = step(cfg.integrator, prev, dt, rhs);
    const double t = i * dt;
    guard.check(t, u);
    if (i % cfg.cadence == 0 || i == n) {
      const double residual = l2_distance(u, step(other, prev, dt, rhs));
      traj.states.push_back({t, u, std::nullopt, std::nullopt});
      traj.diagnostics.push_back(diagnose(t, u, a, q, residual));
    }
  }
  return traj;
}

GeodesicTrajectory integrate_lagrangian(const SpectralField& v0, const SolverConfig& cfg) {
  cfg.validate();
  const SpectralOperator a = realize(cfg.inertia, cfg.grid);
  check_velocity(v0, a);
  const TorusGrid& g = cfg.grid;
  const int n = cfg.steps();
  const double dt = cfg.t_end / n;
  const double q = cfg.diagnostic_q();
  std::optional<Diffeo> warm;
  const auto inverse = [&warm](const Diffeo& phi) {
    InversionOptions opts;
    opts.tol = 1e-12;
    if (warm) opts.initial_guess = &*warm;
    Diffeo inv = invert_diffeo(phi, opts);
    warm = inv;
    return inv;
  };
  const auto rhs = [&](const LagState& y) {
    const Diffeo phi(y.f);
    const SpectralField u = compose(y.v, inverse(phi));
    return LagState{y.v, compose(spray(u, a), phi)};
  };
  const Integrator other = cfg.integrator == Integrator::rk4 ? Integrator::midpoint : Integrator::rk4;

  GeodesicTrajectory traj;
  traj.states.push_back({0.0, v0, Diffeo::identity(g), v0});
  traj.diagnostics.push_back(diagnose(0.0, v0, a, q, 0.0));
  Guard guard{cfg, sobolev_norm(v0, q), {}};
  LagState y{SpectralField(g, g.dim()), v0};
  for (int i = 1; i <= n; ++i) {
    const LagState prev = y;
    y = step(cfg.integrator, prev, dt, rhs);
    const double t = i * dt;
    const Diffeo phi(y.f);
    const SpectralField u = compose(y.v, inverse(phi));
    guard.check(t, u);
    if (i % cfg.cadence == 0 || i == n) {
      const LagState alt = step(other, prev, dt, rhs);
      const double residual = std::hypot(l2_distance(y.v, alt.v), l2_distance(y.f, alt.f));
      traj.states.push_back({t, u, phi, y.v});
      traj.diagnostics.push_back(diagnose(t, u, a, q, residual));
    }
  }
  return traj;
}

double metric_eval(const Diffeo& phi, const SpectralField& v1, const SpectralField& v2, const SpectralOperator& a) {
  check_velocity(v1, a);
  check_velocity(v2, a);
  if (phi.grid() != a.grid()) throw GridMismatch();
  const TorusGrid& g = a.grid();
  const auto av = TwistedOperator(a, phi).apply(v1).samples();
  const auto w = v2.samples();
  const auto jac = jacobian_det(phi).samples();
  const std::size_t n = g.size();
  double sum = 0.0;
  for (int c = 0; c < g.dim(); ++c) {
    for (std::size_t i = 0; i < n; ++i) sum += av[c * n + i] * w[c * n + i] * jac[i];
  }
  return sum / static_cast<double>(n);
}

std::vector<double> energy(const GeodesicTrajectory& traj, const SpectralOperator& a) {
  if (traj.states.empty()) throw InvalidParameter("trajectory is empty");
  std::vector<double> out;
  for (const auto& s : traj.states) {
    if (s.u) {
      out.push_back(kinetic_energy(*s.u, a));
    } else if (s.phi && s.v) {
      out.push_back(0.5 * metric_eval(*s.phi, *s.v, *s.v, a));
    } else {
      throw InvalidParameter("state carries no velocity");
    }
  }
  return out;
}

std::vector<SpectralField> velocity_basis(const TorusGrid& grid, int max_mode) {
  if (max_mode < 0 || max_mode > grid.max_frequency()) throw InvalidParameter("max_mode out of range");
  const double r = 1.0 / std::numbers::sqrt2;
  std::vector<SpectralField> out;
  for (int c = 0; c < grid.dim(); ++c) {
    SpectralField one(grid, grid.dim());
    one.set_mode(c, {0, 0}, 1.0);
    out.push_back(one);
    for (std::size_t i : grid.band_indices()) {
      const Frequency k = grid.frequency(i);
      if (max_norm(k, grid.dim()) > max_mode) continue;
      if (!(k[1] > 0 || (k[1] == 0 && k[0] > 0))) continue;
      SpectralField cs(grid, grid.dim()), sn(grid, grid.dim());
      cs.set_mode(c, k, r);
      sn.set_mode(c, k, Complex(0.0, -r));
      out.push_back(cs);
      out.push_back(sn);
    }
  }
  return out;
}

double displacement_distance(const Diffeo& a, const Diffeo& b) {
  if (a.grid() != b.grid()) throw GridMismatch();
  const auto sa = a.displacement().samples(), sb = b.displacement().samples();
  double sum = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double d = wrap_signed(sa[i] - sb[i]);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(a.grid().size()));
}

ShootResult shoot(const Diffeo& phi_target, const SolverConfig& cfg, const ShootOptions& opt) {
  cfg.validate();
  if (phi_target.grid() != cfg.grid) throw GridMismatch();
  if (opt.max_iter < 0 || !(opt.step > 0.0) || !(opt.fd_step > 0.0) || !(opt.tol >= 0.0)) {
    throw InvalidParameter("invalid shooting options");
  }
  const auto basis = velocity_basis(cfg.grid, opt.max_mode);
  const std::size_t m = basis.size();
  SolverConfig run = cfg;
  run.cadence = std::numeric_limits<int>::max();

  const auto velocity = [&](const std::vector<double>& p) {
    SpectralField u(cfg.grid, cfg.grid.dim());
    for (std::size_t i = 0; i < m; ++i) u += p[i] * basis[i];
    return u;
  };
  const auto objective = [&](const std::vector<double>& p) {
    try {
      const auto traj = integrate_lagrangian(velocity(p), run);
      const double r = displacement_distance(*traj.final_state().phi, phi_target);
      return r * r;
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  std::vector<double> p(m, 0.0);
  double value = objective(p);
  ShootResult res{velocity(p), std::sqrt(value), 0, false};
  for (int it = 0; it < opt.max_iter; ++it) {
    if (std::sqrt(value) <= opt.tol) break;
    std::vector<double> grad(m);
    double gnorm2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> hi = p, lo = p;
      hi[i] += opt.fd_step;
      lo[i] -= opt.fd_step;
      grad[i] = (objective(hi) - objective(lo)) / (2.0 * opt.fd_step);
      gnorm2 += grad[i] * grad[i];
    }
    if (!std::isfinite(gnorm2) || gnorm2 == 0.0) break;
    bool accepted = false;
    for (double alpha = opt.step; alpha > 1e-12; alpha *= 0.5) {
      std::vector<double> trial(m);
      for (std::size_t i = 0; i < m; ++i) trial[i] = p[i] - alpha * grad[i];
      const double tv = objective(trial);
      if (tv <= value - 1e-4 * alpha * gnorm2) {
        p = std::move(trial);
        value = tv;
        accepted = true;
        break;
      }
    }
    res.iterations = it + 1;
    if (!accepted) break;
  }
  res.u0 = velocity(p);
  res.residual = std::sqrt(value);
  res.converged = res.residual <= opt.tol;
  return res;
}

}  // namespace epdiff
