// Acceptance gate: one line per criterion, exit status 1 if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "epdiff/commutator_lab.hpp"
#include "epdiff/conjugation.hpp"
#include "epdiff/errors.hpp"
#include "epdiff/geodesic.hpp"
#include "epdiff/random.hpp"

using namespace epdiff;

namespace {

constexpr double pi = std::numbers::pi;
constexpr std::uint64_t kSeed = 20240611;

// Tolerances, pinned.
constexpr double kIdentityTol = 1e-10;
constexpr double kSplitTol = 1e-9;
constexpr double kFormulaTol = 1e-10;
constexpr double kProbeSpread = 0.25;
constexpr double kProbeSlope = 0.1;
constexpr double kOrderTwoBand = 0.2;
constexpr double kSteadyTol = 1e-12;
constexpr double kEnergyTol = 1e-8;
constexpr double kMomentumTol = 1e-8;
constexpr double kRk4Band = 0.3;
constexpr double kEulerLagrangeTol = 1e-4;
constexpr double kMetricSymTol = 1e-10;
constexpr double kRightInvTol = 1e-5;
constexpr double kShootTranslationTol = 1e-6;
constexpr double kShootSelfTol = 1e-2;
constexpr double kGrowthLimit = 10.0;
// Standard initial datum u0 = kDatumAmplitude sin(2πx).
constexpr double kDatumAmplitude = 0.02;

struct Line {
  bool pass;
  std::string detail;
};

double l2(const SpectralField& f) { return sobolev_norm(f, 0.0); }

SpectralField sampled(const TorusGrid& g, auto&& fn) {
  std::vector<double> s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) s[i] = fn(g.point(i));
  return SpectralField::from_samples(g, 1, s);
}

SpectralField sine(const TorusGrid& g, double amp, int k = 1) {
  return sampled(g, [=](Point x) { return amp * std::sin(2 * pi * k * x[0]); });
}

SpectralField trig(const TorusGrid& g, std::uint64_t stream, int deg, int components = 1) {
  return random_field(g, components, kSeed, stream, {.decay = 0.0, .max_mode = deg});
}

SymbolSpec sine_separable(const TorusGrid& g, double s) {
  const auto factor = sampled(g, [](Point x) { return 1.0 + 0.5 * std::sin(2 * pi * x[0]); });
  return SymbolSpec::separable(factor, FrequencyProfile::bessel_power(s), 2.0 * s);
}

SpectralOperator mul(const SpectralField& f) { return SpectralOperator::multiplication(f); }

// Relative Frobenius gap on rows and columns with |k|_inf <= window, computed
// here from the dense matrices rather than through the library helper.
double gap(const SpectralOperator& a, const SpectralOperator& b, int window) {
  const TorusGrid& g = a.grid();
  std::vector<Eigen::Index> idx;
  const std::size_t nb = g.band_size();
  for (int c = 0; c < a.components(); ++c) {
    for (std::size_t p = 0; p < nb; ++p) {
      if (max_norm(g.frequency(g.band_indices()[p]), g.dim()) <= window) idx.push_back(c * nb + p);
    }
  }
  const Matrix ma = a.to_dense()(idx, idx), mb = b.to_dense()(idx, idx);
  const double scale = std::max(ma.norm(), mb.norm());
  return scale == 0.0 ? 0.0 : (ma - mb).norm() / scale;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Line criterion_identities() {
  const TorusGrid g(1, 32);
  const int deg = 2;
  double worst = 0.0;
  int count = 0;
  for (int n = 0; n <= 2; ++n) {
    const int window = g.max_frequency() - (n + 1) * deg;
    for (int t = 0; t < 20; ++t) {
      const auto p = random_local_operator(g, 1, kSeed, 100 * n + t, window);
      std::vector<SpectralField> fs;
      for (int i = 0; i <= n; ++i) fs.push_back(trig(g, 10 * t + i + 1000 * n, deg));
      const auto head = std::span(fs).first(n);
      const SpectralField& last = fs.back();
      const auto dj = SpectralOperator::derivative(g, 0);
      const auto djp = commutator(dj, p);
      const auto pd = p * dj;

      // Dense Leibniz and Jacobi on full-band random operators.
      const auto b = random_local_operator(g, 1, kSeed, 5000 + 100 * n + t, g.max_frequency());
      const auto c = random_local_operator(g, 1, kSeed, 6000 + 100 * n + t, g.max_frequency());
      const double scale = p.frobenius_norm() * b.frobenius_norm() * c.frobenius_norm();
      worst = std::max(worst, (commutator(p * b, c) - p * commutator(b, c) - commutator(p, c) * b).frobenius_norm() /
                                  scale);
      worst = std::max(worst, (commutator(p, commutator(b, c)) + commutator(b, commutator(c, p)) +
                               commutator(c, commutator(p, b)))
                                      .frobenius_norm() /
                                  scale);

      if (n >= 1) {
        const MultilinearMap sn{n, [&p](std::span<const SpectralField> a) { return nested_commutator(a, p); }};
        const auto rhs = mul(last) * nested_commutator(head, djp) + nested_commutator(fs, pd) +
                         nested_commutator(head, p) * mul(partial_derivative(last, 0));
        worst = std::max(worst, gap(rec_j(sn, fs, 0), rhs, window));
      }
      auto leib = nested_commutator(fs, p) * dj;
      for (std::size_t k = 0; k < fs.size(); ++k) {
        std::vector<SpectralField> rest;
        for (std::size_t i = 0; i < fs.size(); ++i) {
          if (i != k) rest.push_back(fs[i]);
        }
        leib = leib - nested_commutator(rest, p) * mul(partial_derivative(fs[k], 0));
      }
      worst = std::max(worst, gap(nested_commutator(fs, pd), leib, window));
      auto jac = nested_commutator(head, djp);
      for (int k = 0; k < n; ++k) {
        std::vector<SpectralField> sub(head.begin(), head.end());
        sub[k] = partial_derivative(sub[k], 0);
        jac = jac + nested_commutator(sub, p);
      }
      worst = std::max(worst, gap(commutator(dj, nested_commutator(head, p)), jac, window));
      if (n == 2) {
        const std::vector<SpectralField> ab{fs[0], fs[1]}, ba{fs[1], fs[0]}, perm{fs[2], fs[0], fs[1]};
        worst = std::max(worst, gap(nested_commutator(ab, p), nested_commutator(ba, p), g.max_frequency()));
        worst = std::max(worst, gap(mult_op(fs), mult_op(perm), g.max_frequency()));
      }
      ++count;
    }
  }
  return {worst <= kIdentityTol, "algebraic identities, " + std::to_string(count) +
                                     " instances n <= 2: max relative residual " + sci(worst) + " (tol " +
                                     sci(kIdentityTol) + ")"};
}

Line criterion_splitting() {
  const TorusGrid g1(1, 32), g2(2, 16);
  struct Case {
    TorusGrid grid;
    int deg;
    SymbolSpec spec;
    int spec_degree;
  };
  const std::vector<Case> cases{{g1, 3, SymbolSpec::bessel_power(1.0), 0},
                                {g1, 3, sine_separable(g1, 1.0), 1},
                                {g2, 1, SymbolSpec::bessel_power(1.0, 2, 2), 0}};
  double worst = 0.0;
  for (const auto& cs : cases) {
    const auto a = realize(cs.spec, cs.grid);
    for (int n : {1, 2}) {
      const auto terms = split_terms(n, cs.spec.order, cs.grid.dim());
      for (int t = 0; t < 3; ++t) {
        std::vector<SpectralField> us;
        for (int i = 0; i < n; ++i) us.push_back(trig(cs.grid, 300 + 10 * t + i, cs.deg, cs.grid.dim()));
        const int window = cs.grid.max_frequency() - n * cs.deg - cs.spec_degree;
        worst = std::max(worst, window_gap(evaluate_terms(terms, us, a), a_n(us, a), window, true));
      }
    }
  }
  return {worst <= kSplitTol, "splitting sum vs recurrence, n in {1,2}: max relative operator-norm gap " + sci(worst) +
                                  " (tol " + sci(kSplitTol) + ")"};
}

Line criterion_appendix() {
  // Integer-valued symbol: the subset-sum recursion must hold with zero residual.
  const SymbolHatFn p = [](const Frequency& l, const Frequency& k) {
    Matrix m(1, 1);
    m(0, 0) = Complex(2 * k[0] * k[0] * k[0] - 3 * k[0] * k[1] + l[0] * k[0] + 5, l[1] * k[0] - k[1]);
    return m;
  };
  const CounterRng rng(kSeed, 9);
  double recursion = 0.0;
  for (int t = 0; t < 20; ++t) {
    std::vector<Frequency> xs;
    for (int i = 0; i < 5; ++i) {
      xs.push_back({static_cast<int>(rng.uniform(t, i, 0) * 13) - 6, static_cast<int>(rng.uniform(t, i, 1) * 13) - 6});
    }
    const Frequency lam{static_cast<int>(rng.uniform(t, 9) * 7) - 3, 1};
    for (std::size_t n = 1; n <= 3; ++n) {
      std::vector<Frequency> base(xs.begin(), xs.begin() + n), longer = base;
      base.insert(base.begin(), xs[4]);
      longer.insert(longer.begin(), xs[4]);
      longer.push_back(xs[3]);
      std::vector<Frequency> shifted = base;
      shifted[0] = {base[0][0] + xs[3][0], base[0][1] + xs[3][1]};
      recursion = std::max(
          recursion, (p_hat_n(p, lam, base) - p_hat_n(p, lam, shifted) - p_hat_n(p, lam, longer)).cwiseAbs().maxCoeff());
    }
  }
  const TorusGrid g(1, 32);
  const auto sep = sine_separable(g, 1.0);
  double mult = 0.0, sepr = 0.0;
  for (int t = 0; t < 10; ++t) {
    for (int n : {1, 2}) {
      std::vector<Frequency> modes;
      for (int i = 0; i < n; ++i) modes.push_back({static_cast<int>(rng.uniform(100 + t, i) * 7) - 3, 0});
      const Frequency w{static_cast<int>(rng.uniform(100 + t, 9) * 11) - 5, 0};
      mult = std::max(mult, symbol_formula_check(SymbolSpec::bessel_power(1.0), g, modes, w));
      sepr = std::max(sepr, symbol_formula_check(sep, g, modes, w));
    }
  }
  const bool ok = recursion == 0.0 && mult <= kFormulaTol && sepr <= kFormulaTol;
  return {ok, "p_hat recursion residual " + sci(recursion) + " (exact, n <= 3); symbol formula residual multiplier " +
                  sci(mult) + ", separable " + sci(sepr) + " (tol " + sci(kFormulaTol) + ")"};
}

Line criterion_probe() {
  const std::vector<double> ns{32, 64, 128};
  bool ok = true;
  std::string detail = "boundedness probe q=2 r=1, 200 samples:";
  for (int n : {1, 2}) {
    const double s = (1.0 + n - 1.0) / 2.0;
    for (bool separable : {false, true}) {
      std::vector<double> maxima;
      for (double nn : ns) {
        const TorusGrid g(1, static_cast<int>(nn));
        const SymbolSpec spec = separable ? sine_separable(g, s) : SymbolSpec::bessel_power(s);
        maxima.push_back(boundedness_probe(realize(spec, g), n, 2.0, 1.0, 200, kSeed).max_ratio);
      }
      const auto [lo, hi] = std::ranges::minmax(maxima);
      const double spread = hi / lo - 1.0, slope = loglog_slope(ns, maxima);
      ok = ok && spread <= kProbeSpread && slope <= kProbeSlope;
      detail += std::string(" [n=") + std::to_string(n) + (separable ? " separable" : " multiplier") +
                ": spread " + sci(spread) + ", log-N slope " + sci(slope) + "]";
    }
  }
  return {ok, detail + " (tol spread " + sci(kProbeSpread) + ", slope " + sci(kProbeSlope) + ")"};
}

Line criterion_conjugation() {
  const std::vector<double> ladder{1e-2, 5e-3, 2.5e-3};
  const TorusGrid g(1, 64);
  double worst = 0.0;
  std::string slopes;
  for (const auto& spec : {SymbolSpec::bessel_power(1.0), sine_separable(g, 1.0)}) {
    const auto a = realize(spec, g);
    auto h = random_field(g, 1, kSeed, 400, {.decay = 3.0, .max_mode = 4});
    auto h2 = random_field(g, 1, kSeed, 401, {.decay = 3.0, .max_mode = 3});
    const auto v = random_field(g, 1, kSeed, 402, {.decay = 2.0, .max_mode = 6});
    h *= 0.5 / l2(h);
    h2 *= 0.5 / l2(h2);
    const double s1 = first_derivative_study(a, h, v, ladder).slope;
    const double s2 = second_derivative_study(a, h, h2, v, ladder).slope;
    worst = std::max({worst, std::abs(s1 - 2.0), std::abs(s2 - 2.0)});
    slopes += " " + sci(s1) + "/" + sci(s2);
  }
  return {worst <= kOrderTwoBand, "Gateaux difference quotients vs [grad_h, A]v and A_2: fitted orders (first/second)" +
                                      slopes + " (target 2 +- " + sci(kOrderTwoBand) + ")"};
}

SolverConfig solver(int n, double s, double dt, double t_end) {
  SolverConfig cfg;
  cfg.grid = TorusGrid(1, n);
  cfg.inertia = SymbolSpec::bessel_power(s);
  cfg.dt = dt;
  cfg.t_end = t_end;
  cfg.cadence = 10;
  return cfg;
}

Line criterion_geodesics() {
  bool ok = true;
  std::string detail;

  SolverConfig cs = solver(128, 1.0, 1e-3, 1.0);
  const auto c = SpectralField::scalar_constant(cs.grid, 0.37);
  const double steady = (*integrate_eulerian(c, cs).final_state().u - c).max_abs_coefficient();
  ok = ok && steady <= kSteadyTol;
  detail += "steady " + sci(steady);

  double drift = 0.0, mom = 0.0;
  for (double s : {0.6, 1.0, 1.5, 2.0}) {
    const auto cfg = solver(128, s, 1e-3, 1.0);
    const auto traj = integrate_eulerian(sine(cfg.grid, kDatumAmplitude), cfg);
    const auto& d = traj.diagnostics;
    for (const auto& x : d) {
      drift = std::max(drift, std::abs(x.energy - d.front().energy) / d.front().energy);
      mom = std::max(mom, std::abs(x.momentum_int[0] - d.front().momentum_int[0]));
    }
  }
  ok = ok && drift <= kEnergyTol && mom <= kMomentumTol;
  detail += "; energy drift " + sci(drift) + "; momentum drift " + sci(mom);

  SolverConfig cc = solver(64, 1.0, 5e-4, 0.1);
  const auto u0 = sine(cc.grid, 1.0) + sampled(cc.grid, [](Point x) { return 0.3 * std::cos(4 * pi * x[0]); });
  const auto ref = *integrate_eulerian(u0, cc).final_state().u;
  std::vector<double> dts{4e-3, 2e-3, 1e-3}, errs;
  for (double dt : dts) {
    cc.dt = dt;
    errs.push_back(l2(*integrate_eulerian(u0, cc).final_state().u - ref));
  }
  const double order = loglog_slope(dts, errs);
  ok = ok && std::abs(order - 4.0) <= kRk4Band;
  detail += "; RK4 order " + sci(order);

  const auto cl = solver(128, 1.0, 5e-3, 0.5);
  const auto ul = sine(cl.grid, kDatumAmplitude);
  const auto eul = integrate_eulerian(ul, cl);
  const auto lag = integrate_lagrangian(ul, cl);
  const auto& last = lag.final_state();
  const double el = l2(*eul.final_state().u - compose(*last.v, invert_diffeo(*last.phi, 1e-12))) / l2(ul);
  ok = ok && el <= kEulerLagrangeTol;
  detail += "; Eulerian-Lagrangian gap " + sci(el);
  return {ok, detail};
}

Line criterion_metric() {
  const TorusGrid g(1, 128);
  const auto a = realize(SymbolSpec::bessel_power(1.0), g);
  double sym = 0.0, inv = 0.0;
  for (int t = 0; t < 5; ++t) {
    const auto v1 = random_field(g, 1, kSeed, 500 + t, {.decay = 3.0, .max_mode = 8});
    const auto v2 = random_field(g, 1, kSeed, 510 + t, {.decay = 3.0, .max_mode = 8});
    auto f = random_field(g, 1, kSeed, 520 + t, {.decay = 4.0, .max_mode = 6});
    f *= 0.1 / sobolev_norm(f, 3.0);
    const Diffeo psi(f);
    const double g12 = metric_eval(psi, v1, v2, a), g21 = metric_eval(psi, v2, v1, a);
    sym = std::max(sym, std::abs(g12 - g21) / std::abs(g12));
    const auto moved = compose(v1, psi);
    const double base = metric_eval(Diffeo::identity(g), v1, v1, a);
    inv = std::max(inv, std::abs(metric_eval(psi, moved, moved, a) - base) / base);
  }
  return {sym <= kMetricSymTol && inv <= kRightInvTol,
          "metric symmetry " + sci(sym) + " (tol " + sci(kMetricSymTol) + "); right-invariance gap " + sci(inv) +
              " (tol " + sci(kRightInvTol) + ", |f|_H3 = 0.1)"};
}

Line criterion_shooting() {
  SolverConfig cfg = solver(32, 1.0, 0.05, 1.0);
  cfg.cadence = 1000;
  const auto trans = shoot(Diffeo::translation(cfg.grid, {0.23, 0.0}), cfg, {.tol = 1e-9});
  const double e1 = l2(trans.u0 - SpectralField::scalar_constant(cfg.grid, 0.23));
  const auto star = sine(cfg.grid, 0.05) +
                    sampled(cfg.grid, [](Point x) { return 0.03 * std::cos(4 * pi * x[0]) + 0.01; });
  const Diffeo target = *integrate_lagrangian(star, cfg).final_state().phi;
  const auto found = shoot(target, cfg, {.max_iter = 30, .tol = 1e-7});
  const double e2 = l2(found.u0 - star);
  return {e1 <= kShootTranslationTol && e2 <= kShootSelfTol,
          "shooting: translation |u0 - c| " + sci(e1) + " (tol " + sci(kShootTranslationTol) +
              "), self-generated target |u0 - u*| " + sci(e2) + " (tol " + sci(kShootSelfTol) + ")"};
}

double growth_factor(double amplitude) {
  SolverConfig cfg = solver(128, 2.0, 1e-3, 10.0);
  cfg.cadence = 100;
  const auto traj = integrate_eulerian(sine(cfg.grid, amplitude), cfg);
  double hi = 0.0;
  for (const auto& d : traj.diagnostics) hi = std::max(hi, d.hq_norm);
  return hi / traj.diagnostics.front().hq_norm;
}

Line criterion_long_run() {
  const double growth = growth_factor(kDatumAmplitude);
  std::string detail = "H^4 growth over T = 10, s = 2, u0 = " + sci(kDatumAmplitude) + " sin(2 pi x): " + sci(growth) +
                       " (limit " + sci(kGrowthLimit) + "). Observation only; consistent with global"
                       " well-posedness, proves nothing about it.";
  return {growth < kGrowthLimit, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Line()>>> criteria{
      {1, criterion_identities}, {2, criterion_splitting}, {3, criterion_appendix},
      {4, criterion_probe},      {5, criterion_conjugation}, {6, criterion_geodesics},
      {7, criterion_metric},     {8, criterion_shooting},  {9, criterion_long_run}};
  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Line line{false, ""};
    try {
      line = fn();
    } catch (const std::exception& e) {
      line = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s  %s  [%.1fs]\n", id, line.pass ? "PASS" : "FAIL", line.detail.c_str(), secs);
    std::fflush(stdout);
    if (!line.pass) ++failures;
  }
  for (double amp : {0.05, 0.1}) {
    std::printf("info: H^4 growth over T = 10 at amplitude %.2f: %s\n", amp, sci(growth_factor(amp)).c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
