#include <doctest.h>

#include <cmath>
#include <numbers>

#include "epdiff/commutator_lab.hpp"
#include "epdiff/conjugation.hpp"
#include "epdiff/errors.hpp"
#include "epdiff/geodesic.hpp"
#include "epdiff/random.hpp"

using namespace epdiff;

namespace {

constexpr double pi = std::numbers::pi;

SpectralField sampled(const TorusGrid& g, auto&& fn) {
  std::vector<double> s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) s[i] = fn(g.point(i));
  return SpectralField::from_samples(g, 1, s);
}

SpectralField sine(const TorusGrid& g, int k = 1, double amp = 1.0) {
  return sampled(g, [k, amp](Point x) { return amp * std::sin(2 * pi * k * x[0]); });
}

double l2(const SpectralField& f) { return sobolev_norm(f, 0.0); }

SolverConfig config(int n, double s, double dt, double t_end) {
  SolverConfig cfg;
  cfg.grid = TorusGrid(1, n);
  cfg.inertia = SymbolSpec::bessel_power(s);
  cfg.dt = dt;
  cfg.t_end = t_end;
  cfg.cadence = 10;
  return cfg;
}

double relative_drift(const std::vector<double>& e) {
  double worst = 0.0;
  for (double x : e) worst = std::max(worst, std::abs(x - e.front()));
  return worst / std::abs(e.front());
}

std::vector<double> energies(const GeodesicTrajectory& t) {
  std::vector<double> out;
  for (const auto& d : t.diagnostics) out.push_back(d.energy);
  return out;
}

}  // namespace

TEST_CASE("momentum") {
  const TorusGrid g(1, 32);
  const auto a = realize(SymbolSpec::bessel_power(1.0), g);
  CHECK(momentum(SpectralField(g, 1), a).max_abs_coefficient() == 0.0);
  const auto m = momentum(sine(g), a);
  CHECK((m - 2.0 * sine(g)).max_abs_coefficient() <= 1e-14);
  const auto c = SpectralField::scalar_constant(g, 0.3);
  CHECK((momentum(c, a) - c).max_abs_coefficient() == 0.0);
  CHECK_THROWS_AS(momentum(SpectralField(g, 2), a), ShapeMismatch);
}

TEST_CASE("Euler-Arnold right-hand side") {
  const TorusGrid g(1, 32);
  const auto a = realize(SymbolSpec::bessel_power(1.0), g);
  CHECK(euler_arnold_rhs(SpectralField::scalar_constant(g, 0.7), a).max_abs_coefficient() == 0.0);

  // m = 2 sin, u m_x + 2 u_x m = 6π sin(4πx), a(2) = 5.
  const auto rhs = euler_arnold_rhs(sine(g), a);
  CHECK((rhs - sine(g, 2, -6.0 * pi / 5.0)).max_abs_coefficient() <= 1e-13);

  const auto u = random_field(g, 1, 1, 0, {.decay = 2.0});
  const auto r1 = euler_arnold_rhs(u, a), r2 = euler_arnold_rhs(2.0 * u, a);
  CHECK(l2(r2 - 4.0 * r1) <= 1e-10 * l2(r2));

  const TorusGrid g2(2, 16);
  const auto a2 = realize(SymbolSpec::bessel_power(1.0, 2, 2), g2);
  const std::vector<double> c{0.2, -0.5};
  CHECK(euler_arnold_rhs(SpectralField::constant(g2, c), a2).max_abs_coefficient() == 0.0);
}

TEST_CASE("spray") {
  const TorusGrid g(1, 32);
  const auto a = realize(SymbolSpec::bessel_power(1.0), g);
  CHECK(spray(SpectralField::scalar_constant(g, -1.5), a).max_abs_coefficient() == 0.0);
  CHECK((spray(sine(g), a) - sine(g, 2, -pi / 5.0)).max_abs_coefficient() <= 1e-13);

  for (int dim : {1, 2}) {
    const TorusGrid gd(dim, dim == 1 ? 64 : 16);
    const auto sep = [&] {
      if (dim == 2) return SymbolSpec::bessel_power(1.5, 2, 2);
      const auto factor = sampled(gd, [](Point x) { return 1.0 + 0.3 * std::cos(2 * pi * x[0]); });
      return SymbolSpec::separable(factor, FrequencyProfile::bessel_power(1.0), 2.0);
    }();
    const auto ad = realize(sep, gd);
    for (std::uint64_t t = 0; t < 3; ++t) {
      const auto u = random_field(gd, dim, 4, t, {.decay = 2.0});
      const auto lhs = spray(u, ad);
      const auto rhs = euler_arnold_rhs(u, ad) + covariant_derivative(u, u);
      CHECK(l2(lhs - rhs) <= 1e-10 * l2(lhs));
    }
  }
}

TEST_CASE("solver configuration") {
  SolverConfig cfg = config(32, 1.0, 1e-2, 1.0);
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.diagnostic_q() == doctest::Approx(2.0));
  CHECK(cfg.steps() == 100);
  cfg.dt = 0.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), "dt must be positive", InvalidParameter);
  cfg = config(32, 1.0, 2.0, 1.0);
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg = config(32, 0.25, 1e-2, 1.0);
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg = config(32, 1.0, 1e-2, 1.0);
  cfg.inertia = SymbolSpec::multiplier(FrequencyProfile::poly({-1.0, 1.0}), 2.0);
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
}

TEST_CASE("constant states are steady") {
  const SolverConfig cfg = config(32, 1.0, 1e-2, 1.0);
  const auto c = SpectralField::scalar_constant(cfg.grid, 0.37);
  const auto traj = integrate_eulerian(c, cfg);
  CHECK((*traj.final_state().u - c).max_abs_coefficient() <= 1e-12);
  for (const auto& d : traj.diagnostics) CHECK(std::abs(d.energy - 0.5 * 0.37 * 0.37) <= 1e-12);
  CHECK(traj.diagnostics.size() == 11);
  CHECK(traj.final_state().t == doctest::Approx(1.0));
}

TEST_CASE("energy and momentum are conserved for the standard datum") {
  for (double s : {0.6, 1.0, 1.5, 2.0}) {
    const SolverConfig cfg = config(128, s, 1e-3, 1.0);
    const auto a = realize(cfg.inertia, cfg.grid);
    const auto traj = integrate_eulerian(sine(cfg.grid, 1, 0.02), cfg);
    CAPTURE(s);
    CHECK(relative_drift(energies(traj)) <= 1e-8);
    double worst = 0.0;
    for (const auto& d : traj.diagnostics) worst = std::max(worst, std::abs(d.momentum_int[0]));
    CHECK(worst <= 1e-8);
    const auto e = energy(traj, a);
    CHECK(e.front() == doctest::Approx(traj.diagnostics.front().energy));
  }
}

// Recorded conflict: a(k) = 1 + k² is Camassa-Holm, and the unit sine datum
// breaks near t ≈ 0.3, so the energy of the truncated solution is not kept.
TEST_CASE("energy drift for the unit sine datum at s = 1" * doctest::may_fail()) {
  const SolverConfig cfg = config(128, 1.0, 1e-3, 1.0);
  try {
    const auto traj = integrate_eulerian(sine(cfg.grid), cfg);
    CHECK(relative_drift(energies(traj)) <= 1e-8);
  } catch (const BlowUpSuspected& e) {
    FAIL("blow-up suspected at t = " << e.time());
  }
}

TEST_CASE("RK4 self-convergence") {
  SolverConfig cfg = config(64, 1.0, 1e-3, 0.1);
  const auto u0 = sine(cfg.grid, 1, 1.0) + sampled(cfg.grid, [](Point x) { return 0.3 * std::cos(4 * pi * x[0]); });
  cfg.dt = 4e-3 / 8.0;
  const auto ref = *integrate_eulerian(u0, cfg).final_state().u;
  std::vector<double> dts{4e-3, 2e-3, 1e-3}, errs;
  for (double dt : dts) {
    cfg.dt = dt;
    errs.push_back(l2(*integrate_eulerian(u0, cfg).final_state().u - ref));
  }
  CAPTURE(errs[0]);
  CAPTURE(errs[1]);
  CAPTURE(errs[2]);
  CHECK(errs[0] / errs[1] == doctest::Approx(16.0).epsilon(0.25));
  CHECK(loglog_slope(dts, errs) == doctest::Approx(4.0).epsilon(0.075));

  cfg.integrator = Integrator::midpoint;
  std::vector<double> merrs;
  for (double dt : dts) {
    cfg.dt = dt;
    merrs.push_back(l2(*integrate_eulerian(u0, cfg).final_state().u - ref));
  }
  CHECK(loglog_slope(dts, merrs) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("time reversal") {
  const SolverConfig cfg = config(64, 1.0, 2e-3, 0.5);
  const auto u0 = random_field(cfg.grid, 1, 2, 0, {.decay = 3.0, .max_mode = 6}) * 0.1;
  const auto u1 = *integrate_eulerian(u0, cfg).final_state().u;
  const auto back = *integrate_eulerian(-u1, cfg).final_state().u;
  CHECK(l2(back + u0) <= 1e-6 * l2(u0));
}

TEST_CASE("blow-up guard") {
  SolverConfig cfg = config(32, 1.0, 1e-2, 1.0);
  cfg.growth_limit = 1.0001;
  try {
    integrate_eulerian(sine(cfg.grid), cfg);
    FAIL("expected a blow-up report");
  } catch (const BlowUpSuspected& e) {
    CHECK(e.time() > 0.0);
    CHECK(!e.norm_history().empty());
  }
  cfg = config(32, 1.0, 0.1, 1.0);
  CHECK_THROWS_AS(integrate_eulerian(sine(cfg.grid), cfg), BlowUpSuspected);
}

TEST_CASE("Lagrangian integration") {
  SolverConfig cfg = config(32, 1.0, 1e-2, 1.0);
  const auto c = SpectralField::scalar_constant(cfg.grid, 0.3);
  const auto traj = integrate_lagrangian(c, cfg);
  const auto& last = traj.final_state();
  CHECK((last.phi->displacement() - c).max_abs_coefficient() <= 1e-12);
  CHECK((*last.v - c).max_abs_coefficient() <= 1e-12);

  const auto still = integrate_lagrangian(SpectralField(cfg.grid, 1), cfg);
  CHECK(still.final_state().phi->displacement().max_abs_coefficient() == 0.0);

  cfg = config(128, 1.0, 5e-3, 0.5);
  const auto u0 = sine(cfg.grid, 1, 0.02);
  const auto eul = integrate_eulerian(u0, cfg);
  const auto lag = integrate_lagrangian(u0, cfg);
  const auto& s = lag.final_state();
  const auto u_lag = compose(*s.v, invert_diffeo(*s.phi, 1e-12));
  CHECK(l2(*eul.final_state().u - u_lag) <= 1e-4 * l2(u0));
  CHECK(l2(*s.u - u_lag) <= 1e-12);
}

TEST_CASE("metric") {
  const TorusGrid g(1, 128);
  const auto a = realize(SymbolSpec::bessel_power(1.0), g);
  const auto s = sine(g);
  CHECK(metric_eval(Diffeo::identity(g), s, s, a) == doctest::Approx(1.0).epsilon(1e-13));

  const auto v1 = random_field(g, 1, 3, 0, {.decay = 3.0, .max_mode = 8});
  const auto v2 = random_field(g, 1, 3, 1, {.decay = 3.0, .max_mode = 8});
  for (std::uint64_t t = 0; t < 3; ++t) {
    auto f = random_field(g, 1, 3, 10 + t, {.decay = 4.0, .max_mode = 6});
    f *= 0.1 / sobolev_norm(f, 3.0);
    const Diffeo psi(f);
    const double g12 = metric_eval(psi, v1, v2, a), g21 = metric_eval(psi, v2, v1, a);
    CHECK(std::abs(g12 - g21) <= 1e-10 * std::abs(g12));

    const auto moved = compose(v1, psi);
    const double lhs = metric_eval(psi, moved, moved, a);
    const double rhs = metric_eval(Diffeo::identity(g), v1, v1, a);
    CHECK(std::abs(lhs - rhs) <= 1e-5 * rhs);
  }
}

TEST_CASE("energy of simple states") {
  const TorusGrid g(1, 32);
  const auto a = realize(SymbolSpec::bessel_power(1.0), g);
  CHECK(kinetic_energy(sine(g), a) == doctest::Approx(0.5).epsilon(1e-14));
  const auto a3 = realize(SymbolSpec::bessel_power(3.0), g);
  CHECK(kinetic_energy(SpectralField::scalar_constant(g, 0.4), a3) == doctest::Approx(0.08));
  CHECK_THROWS_AS(energy(GeodesicTrajectory{}, a), InvalidParameter);
}

TEST_CASE("trajectory CSV") {
  const SolverConfig cfg = config(32, 1.0, 1e-2, 0.1);
  const auto traj = integrate_eulerian(sine(cfg.grid, 1, 0.1), cfg);
  const std::string csv = traj.to_csv();
  CHECK(csv.rfind("t,energy,momentum_int_1,hq_norm,linf_u,step_residual\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(integrate_eulerian(sine(cfg.grid, 1, 0.1), cfg).to_csv() == csv);
  CHECK(traj.diagnostics.back().step_residual > 0.0);
}

TEST_CASE("velocity basis is orthonormal") {
  const TorusGrid g(1, 32);
  const auto b = velocity_basis(g, 4);
  CHECK(b.size() == 9);
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      CHECK(std::abs(l2_inner(b[i], b[j]) - (i == j ? 1.0 : 0.0)) <= 1e-15);
    }
  }
  CHECK(velocity_basis(TorusGrid(2, 16), 2).size() == 2 * 25);
}

TEST_CASE("geodesic shooting") {
  SolverConfig cfg = config(32, 1.0, 0.05, 1.0);
  cfg.cadence = 1000;
  const auto at_id = shoot(Diffeo::identity(cfg.grid), cfg);
  CHECK(at_id.iterations == 0);
  CHECK(at_id.converged);
  CHECK(at_id.u0.max_abs_coefficient() == 0.0);

  const auto trans = shoot(Diffeo::translation(cfg.grid, {0.23, 0.0}), cfg, {.tol = 1e-9});
  CHECK(l2(trans.u0 - SpectralField::scalar_constant(cfg.grid, 0.23)) <= 1e-6);

  const auto star = sine(cfg.grid, 1, 0.05) +
                    sampled(cfg.grid, [](Point x) { return 0.03 * std::cos(4 * pi * x[0]) + 0.01; });
  const Diffeo target = *integrate_lagrangian(star, cfg).final_state().phi;
  const auto found = shoot(target, cfg, {.max_iter = 30, .tol = 1e-7});
  CAPTURE(found.residual);
  CAPTURE(found.iterations);
  CHECK(l2(found.u0 - star) <= 1e-2);
}
