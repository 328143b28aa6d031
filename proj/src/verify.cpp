#include "epdiff/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "epdiff/commutator_lab.hpp"
#include "epdiff/conjugation.hpp"
#include "epdiff/errors.hpp"
#include "epdiff/field_io.hpp"
#include "epdiff/geodesic.hpp"
#include "epdiff/random.hpp"

namespace epdiff {

namespace {

constexpr double pi = std::numbers::pi;

class Collector {
 public:
  explicit Collector(std::string suite) : suite_(std::move(suite)) {}

  void record(const std::string& name, double residual, double tolerance) {
    if (!std::isfinite(residual)) residual = std::numeric_limits<double>::infinity();
    auto it = std::ranges::find(results_, name, &CheckResult::name);
    if (it == results_.end()) {
      results_.push_back({suite_, name, residual, tolerance, false});
    } else {
      it->residual = std::max(it->residual, residual);
    }
  }

  std::vector<CheckResult> finish() {
    for (auto& r : results_) r.pass = r.residual <= r.tolerance;
    return std::move(results_);
  }

 private:
  std::string suite_;
  std::vector<CheckResult> results_;
};

double l2(const SpectralField& f) { return sobolev_norm(f, 0.0); }

double rel(double num, double den) { return den == 0.0 ? num : num / den; }

SpectralField trig(const TorusGrid& g, std::uint64_t seed, std::uint64_t stream, int deg, int components = 1) {
  return random_field(g, components, seed, stream, {.decay = 0.0, .max_mode = deg});
}

SpectralField sampled(const TorusGrid& g, auto&& fn) {
  std::vector<double> s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) s[i] = fn(g.point(i));
  return SpectralField::from_samples(g, 1, s);
}

SymbolSpec sine_separable(const TorusGrid& g, double s) {
  const auto factor = sampled(g, [](Point x) { return 1.0 + 0.5 * std::sin(2 * pi * x[0]); });
  return SymbolSpec::separable(factor, FrequencyProfile::bessel_power(s), 2.0 * s);
}

SpectralOperator mul(const SpectralField& f) { return SpectralOperator::multiplication(f); }

std::vector<CheckResult> spectral_suite(const VerifyOptions& opt) {
  Collector out("spectral");
  const TorusGrid g(1, opt.n), g2(2, 16);
  for (int t = 0; t < opt.instances; ++t) {
    for (const TorusGrid& gr : {g, g2}) {
      const auto f = random_field(gr, 1, opt.seed, 2 * t, {.decay = 2.0});
      const auto h = random_field(gr, 1, opt.seed, 2 * t + 1, {.decay = 2.0});
      out.record("reality_of_products",
                 rel(pointwise_multiply(f, h).reality_defect(), f.max_abs_coefficient() * h.max_abs_coefficient()),
                 1e-13);

      const auto fs = f.samples(), hs = h.samples();
      double mean = 0.0;
      for (std::size_t i = 0; i < fs.size(); ++i) mean += fs[i] * hs[i];
      mean /= static_cast<double>(fs.size());
      out.record("parseval", rel(std::abs(mean - l2_inner(f, h)), l2(f) * l2(h)), 1e-13);

      for (int j = 0; j < gr.dim(); ++j) {
        const auto df = partial_derivative(f, j), dh = partial_derivative(h, j);
        out.record("derivative_skew", rel(std::abs(l2_inner(df, h) + l2_inner(f, dh)), l2(df) * l2(h)), 1e-13);
      }
      out.record("compose_identity",
                 rel((compose(f, Diffeo::identity(gr)) - f).max_abs_coefficient(), f.max_abs_coefficient()), 1e-12);
    }
    // The residual is measured on the band-limited inverse, which needs a finer grid.
    const TorusGrid fine(1, 128);
    auto disp = random_field(fine, 1, opt.seed, 100 + t, {.decay = 4.0, .max_mode = 6});
    disp *= 0.1 / sobolev_norm(disp, 3.0);
    const Diffeo phi(disp);
    out.record("inversion_residual", inversion_residual(phi, invert_diffeo(phi, 1e-12)), 1e-10);
  }
  return out.finish();
}

std::vector<CheckResult> operators_suite(const VerifyOptions& opt) {
  Collector out("operators");
  const TorusGrid g(1, opt.n);
  const auto sep = sine_separable(g, 1.0);
  const auto a_mult = realize(SymbolSpec::bessel_power(1.0), g);
  const auto a_sep = realize(sep, g);
  const auto a_sum = realize(combine(SymbolSpec::bessel_power(1.0), sep), g);
  out.record("realize_linear", rel((a_sum - a_mult - a_sep).frobenius_norm(), a_sum.frobenius_norm()), 1e-12);
  for (int t = 0; t < opt.instances; ++t) {
    const int k = g.max_frequency();
    const auto a = random_local_operator(g, 1, opt.seed, 3 * t, k);
    const auto b = random_local_operator(g, 1, opt.seed, 3 * t + 1, k);
    const auto c = random_local_operator(g, 1, opt.seed, 3 * t + 2, k);
    const double scale = a.frobenius_norm() * b.frobenius_norm() * c.frobenius_norm();
    const auto leibniz = commutator(a * b, c) - a * commutator(b, c) - commutator(a, c) * b;
    out.record("leibniz", rel(leibniz.frobenius_norm(), scale), 1e-10);
    const auto jacobi =
        commutator(a, commutator(b, c)) + commutator(b, commutator(c, a)) + commutator(c, commutator(a, b));
    out.record("jacobi", rel(jacobi.frobenius_norm(), scale), 1e-10);

    const auto f = random_field(g, 1, opt.seed, 50 + t, {.decay = 1.0});
    for (const auto* op : {&a_mult, &a_sep}) {
      out.record("solve_apply_identity", rel(l2(op->solve(op->apply(f)) - f), l2(f)), 1e-10);
      out.record("apply_solve_identity", rel(l2(op->apply(op->solve(f)) - f), l2(f)), 1e-10);
      out.record("reality_preserved", rel(op->apply(f).reality_defect(), l2(op->apply(f))), 1e-12);
    }
  }
  return out.finish();
}

void commutator_checks(Collector& out, const TorusGrid& g, int deg, int max_order, int instances,
                       std::uint64_t seed) {
  for (int n = 0; n <= max_order; ++n) {
    const int window = g.max_frequency() - (n + 1) * deg;
    for (int t = 0; t < instances; ++t) {
      const auto p = random_local_operator(g, 1, seed, 1000 * n + t, window);
      std::vector<SpectralField> fs;
      for (int i = 0; i <= n; ++i) fs.push_back(trig(g, seed, 20 * t + i + 500 * n, deg));
      const auto head = std::span(fs).first(n);
      const SpectralField& last = fs.back();
      const MultilinearMap sn{n, [&p](std::span<const SpectralField> a) { return nested_commutator(a, p); }};
      const MultilinearMap mn{n, [](std::span<const SpectralField> a) { return mult_op(a); }};
      for (int j = 0; j < g.dim(); ++j) {
        const auto dj = SpectralOperator::derivative(g, j);
        const auto djp = commutator(dj, p);
        const auto pd = p * dj;
        if (n >= 1) {
          const auto rhs = mul(last) * nested_commutator(head, djp) + nested_commutator(fs, pd) +
                           nested_commutator(head, p) * mul(partial_derivative(last, j));
          out.record("commutator_lemma", window_gap(rec_j(sn, fs, j), rhs, window), 1e-10);

          const auto scale = commutator(mul(last) * dj, mult_op(head));
          out.record("rec_of_multiplication_vanishes", window_gap(rec_j(mn, fs, j) + scale, scale, window), 1e-10);
        }
        auto leib = nested_commutator(fs, p) * dj;
        for (std::size_t k = 0; k < fs.size(); ++k) {
          std::vector<SpectralField> rest;
          for (std::size_t i = 0; i < fs.size(); ++i) {
            if (i != k) rest.push_back(fs[i]);
          }
          leib = leib - nested_commutator(rest, p) * mul(partial_derivative(fs[k], j));
        }
        out.record("generalized_leibniz", window_gap(nested_commutator(fs, pd), leib, window), 1e-10);

        auto jac = nested_commutator(head, djp);
        for (int k = 0; k < n; ++k) {
          std::vector<SpectralField> sub(head.begin(), head.end());
          sub[k] = partial_derivative(sub[k], j);
          jac = jac + nested_commutator(sub, p);
        }
        out.record("generalized_jacobi", window_gap(commutator(dj, nested_commutator(head, p)), jac, window), 1e-10);
      }
      if (n == 2) {
        const std::vector<SpectralField> ab{fs[0], fs[1]}, ba{fs[1], fs[0]};
        out.record("symmetry_S_n", window_gap(nested_commutator(ab, p), nested_commutator(ba, p), g.max_frequency()),
                   1e-10);
        const std::vector<SpectralField> perm{fs[2], fs[0], fs[1]};
        out.record("symmetry_M_n", window_gap(mult_op(fs), mult_op(perm), g.max_frequency()), 1e-12);
      }
    }
  }
}

std::vector<CheckResult> commutators_suite(const VerifyOptions& opt) {
  Collector out("commutators");
  commutator_checks(out, TorusGrid(1, opt.n), 2, opt.order, opt.instances, opt.seed);
  commutator_checks(out, TorusGrid(2, 16), 1, opt.order, std::min(opt.instances, 2), opt.seed ^ 0x2d);
  return out.finish();
}

std::vector<CheckResult> splitting_suite(const VerifyOptions& opt) {
  Collector out("splitting");
  struct Case {
    TorusGrid grid;
    int deg;
    SymbolSpec spec;
    int spec_degree;
  };
  const TorusGrid g1(1, opt.n), g2(2, 16);
  const std::vector<Case> cases{
      {g1, 3, SymbolSpec::bessel_power(1.0), 0},
      {g1, 3, sine_separable(g1, 1.0), 1},
      {g2, 1, SymbolSpec::bessel_power(1.0, 2, 2), 0},
  };
  for (const auto& cs : cases) {
    const auto a = realize(cs.spec, cs.grid);
    const int dim = cs.grid.dim();
    for (int n = 1; n <= opt.order; ++n) {
      const auto terms = split_terms(n, cs.spec.order, dim);
      const int window = cs.grid.max_frequency() - n * cs.deg - cs.spec_degree;
      for (int t = 0; t < std::min(opt.instances, 3); ++t) {
        std::vector<SpectralField> us;
        for (int i = 0; i < n; ++i) us.push_back(trig(cs.grid, opt.seed, 40 * t + i, cs.deg, dim));
        out.record("split_sum_equals_recurrence_n" + std::to_string(n),
                   window_gap(evaluate_terms(terms, us, a), a_n(us, a), window), 1e-9);
      }
    }
  }
  return out.finish();
}

std::vector<CheckResult> appendix_suite(const VerifyOptions& opt) {
  Collector out("appendix");
  const CounterRng rng(opt.seed, 77);
  const auto draw = [&rng](std::uint64_t a, std::uint64_t b, int lo, int hi) {
    return lo + static_cast<int>(rng.uniform(a, b) * (hi - lo + 1));
  };
  for (int t = 0; t < opt.instances; ++t) {
    std::array<int, 5> c{};
    for (int i = 0; i < 5; ++i) c[i] = draw(t, i, -5, 5);
    // Integer-valued, so the subset-sum recursion holds exactly.
    const SymbolHatFn p = [c](const Frequency& l, const Frequency& k) {
      Matrix m(1, 1);
      m(0, 0) = Complex(c[0] * k[0] * k[0] * k[0] + c[1] * k[0] * k[1] + c[2] * l[0] * k[0] + c[3],
                        c[4] * l[1] - k[1]);
      return m;
    };
    std::vector<Frequency> all;
    for (int i = 0; i < 6; ++i) all.push_back({draw(t, 10 + 2 * i, -6, 6), draw(t, 11 + 2 * i, -6, 6)});
    const Frequency lam{draw(t, 40, -3, 3), draw(t, 41, -3, 3)};
    for (std::size_t n = 1; n <= 3; ++n) {
      std::vector<Frequency> base(all.begin(), all.begin() + n + 1), shifted = base;
      shifted[0] = {base[0][0] + all[n + 1][0], base[0][1] + all[n + 1][1]};
      std::vector<Frequency> longer(all.begin(), all.begin() + n + 2);
      const Matrix diff = p_hat_n(p, lam, base) - p_hat_n(p, lam, shifted) - p_hat_n(p, lam, longer);
      out.record("p_hat_subset_recursion", diff.cwiseAbs().maxCoeff(), 0.0);
    }
  }

  const TorusGrid g(1, opt.n);
  const auto sep = sine_separable(g, 1.0);
  for (int t = 0; t < opt.instances; ++t) {
    for (int n = 1; n <= opt.order; ++n) {
      std::vector<Frequency> modes;
      for (int i = 0; i < n; ++i) modes.push_back({draw(100 + t, i, -3, 3), 0});
      const Frequency w{draw(100 + t, 9, -5, 5), 0};
      out.record("symbol_formula_multiplier", symbol_formula_check(SymbolSpec::bessel_power(1.0), g, modes, w),
                 1e-10);
      out.record("symbol_formula_separable", symbol_formula_check(sep, g, modes, w), 1e-10);
    }
  }
  return out.finish();
}

std::vector<CheckResult> conjugation_suite(const VerifyOptions& opt) {
  Collector out("conjugation");
  const TorusGrid g(1, std::max(opt.n, 64));
  const std::vector<double> ladder{1e-2, 5e-3, 2.5e-3};
  const auto a_mult = realize(SymbolSpec::bessel_power(1.0), g);
  const auto a_sep = realize(sine_separable(g, 1.0), g);
  for (int t = 0; t < std::min(opt.instances, 2); ++t) {
    auto h1 = random_field(g, 1, opt.seed, 200 + 3 * t, {.decay = 3.0, .max_mode = 3});
    auto h2 = random_field(g, 1, opt.seed, 201 + 3 * t, {.decay = 3.0, .max_mode = 3});
    const auto v = random_field(g, 1, opt.seed, 202 + 3 * t, {.decay = 2.0, .max_mode = 5});
    h1 *= 0.5 / l2(h1);
    h2 *= 0.5 / l2(h2);
    for (const auto* a : {&a_mult, &a_sep}) {
      out.record("first_derivative_order", std::abs(first_derivative_study(*a, h1, v, ladder).slope - 2.0), 0.2);
      const auto d = derivative_formula(*a, h1, v);
      out.record("derivative_formula_matches_a1", rel(l2(d - a_n(std::span(&h1, 1), *a).apply(v)), l2(d)), 1e-12);
    }
    out.record("second_derivative_order", std::abs(second_derivative_study(a_sep, h1, h2, v, ladder).slope - 2.0),
               0.2);
    const auto ab = second_derivative_formula(a_sep, h1, h2, v), ba = second_derivative_formula(a_sep, h2, h1, v);
    out.record("a2_symmetry", rel(l2(ab - ba), l2(ab)), 1e-9);

    const auto av = a_mult.apply(v);
    out.record("twist_identity", rel(l2(twist(a_mult, Diffeo::identity(g)).apply(v) - av), l2(av)), 1e-12);
    const Diffeo shift = Diffeo::translation(g, {0.1 + 0.2 * t, 0.0});
    out.record("twist_translation_commutes", rel(l2(twist(a_mult, shift).apply(v) - av), l2(av)), 1e-10);
  }
  return out.finish();
}

std::vector<CheckResult> geodesic_suite(const VerifyOptions& opt) {
  Collector out("geodesic");
  SolverConfig cfg;
  cfg.grid = TorusGrid(1, opt.n);
  cfg.inertia = SymbolSpec::bessel_power(1.0);
  cfg.dt = 1e-3;
  cfg.t_end = 0.25;
  cfg.cadence = 50;
  const auto a = realize(cfg.inertia, cfg.grid);
  for (int t = 0; t < std::min(opt.instances, 2); ++t) {
    const double c = 0.5 * random_field(cfg.grid, 1, opt.seed, 300 + t, {.max_mode = 0}).at(0, 0).real();
    const auto cst = SpectralField::scalar_constant(cfg.grid, c);
    SolverConfig steady = cfg;
    steady.dt = 1e-2;
    out.record("steady_constant",
               (*integrate_eulerian(cst, steady).final_state().u - cst).max_abs_coefficient(), 1e-12);

    auto u0 = random_field(cfg.grid, 1, opt.seed, 310 + t, {.decay = 2.0, .max_mode = 3, .include_mean = false});
    u0 *= 0.02 / l2(u0);
    const auto traj = integrate_eulerian(u0, cfg);
    double drift = 0.0, mom = 0.0;
    for (const auto& d : traj.diagnostics) {
      drift = std::max(drift, std::abs(d.energy - traj.diagnostics.front().energy));
      mom = std::max(mom, std::abs(d.momentum_int[0] - traj.diagnostics.front().momentum_int[0]));
    }
    out.record("energy_drift", rel(drift, traj.diagnostics.front().energy), 1e-8);
    out.record("momentum_drift", mom, 1e-8);

    const auto u = random_field(cfg.grid, 1, opt.seed, 320 + t, {.decay = 2.0});
    const auto s = spray(u, a);
    out.record("spray_identity", rel(l2(s - euler_arnold_rhs(u, a) - covariant_derivative(u, u)), l2(s)), 1e-10);

    const TorusGrid fine(1, 128);
    const auto af = realize(cfg.inertia, fine);
    const auto v1 = random_field(fine, 1, opt.seed, 330 + t, {.decay = 3.0, .max_mode = 8});
    const auto v2 = random_field(fine, 1, opt.seed, 340 + t, {.decay = 3.0, .max_mode = 8});
    auto f = random_field(fine, 1, opt.seed, 350 + t, {.decay = 4.0, .max_mode = 6});
    f *= 0.1 / sobolev_norm(f, 3.0);
    const Diffeo psi(f);
    const double g12 = metric_eval(psi, v1, v2, af), g21 = metric_eval(psi, v2, v1, af);
    out.record("metric_symmetry", rel(std::abs(g12 - g21), std::abs(g12)), 1e-10);
    const auto moved = compose(v1, psi);
    const double moved_norm = metric_eval(psi, moved, moved, af);
    const double base_norm = metric_eval(Diffeo::identity(fine), v1, v1, af);
    out.record("right_invariance", rel(std::abs(moved_norm - base_norm), base_norm), 1e-5);
  }
  return out.finish();
}

std::vector<CheckResult> probe_suite(const VerifyOptions& opt) {
  Collector out("probe");
  std::vector<double> ns, maxima;
  for (int n : {opt.n, 2 * opt.n, 4 * opt.n}) {
    const TorusGrid g(1, n);
    const auto rep = boundedness_probe(realize(SymbolSpec::bessel_power(0.5), g), 1, 2.0, 1.0, 50, opt.seed);
    ns.push_back(n);
    maxima.push_back(rep.max_ratio);
  }
  const auto [lo, hi] = std::ranges::minmax(maxima);
  out.record("probe_ratio_stable", hi / lo - 1.0, 0.25);
  out.record("probe_no_upward_trend", loglog_slope(ns, maxima), 0.1);
  return out.finish();
}

}  // namespace

void VerifyOptions::validate() const {
  if (n < 32 || n > 128 || n % 2 != 0) throw InvalidParameter("n must be even and within [32, 128]");
  if (order < 1 || order > 2) throw InvalidParameter("order must be 1 or 2");
  if (instances < 1 || instances > 20) throw InvalidParameter("instances must be within [1, 20]");
}

const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names{"spectral",  "operators",   "commutators", "splitting",
                                              "appendix", "conjugation", "geodesic",    "probe"};
  return names;
}

std::vector<CheckResult> run_verify_suite(const std::string& suite, const VerifyOptions& opt) {
  opt.validate();
  if (suite == "spectral") return spectral_suite(opt);
  if (suite == "operators") return operators_suite(opt);
  if (suite == "commutators") return commutators_suite(opt);
  if (suite == "splitting") return splitting_suite(opt);
  if (suite == "appendix") return appendix_suite(opt);
  if (suite == "conjugation") return conjugation_suite(opt);
  if (suite == "geodesic") return geodesic_suite(opt);
  if (suite == "probe") return probe_suite(opt);
  throw InvalidParameter("unknown suite '" + suite + "'");
}

std::vector<CheckResult> run_verify_all(const VerifyOptions& opt) {
  opt.validate();
  std::vector<CheckResult> all;
  for (const auto& name : verify_suite_names()) {
    auto part = run_verify_suite(name, opt);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

std::string verify_report_json(const std::vector<CheckResult>& results, const VerifyOptions& opt) {
  const bool all_pass = std::ranges::all_of(results, &CheckResult::pass);
  std::ostringstream os;
  os << "{\n  \"seed\": " << opt.seed << ",\n  \"n\": " << opt.n << ",\n  \"order\": " << opt.order
     << ",\n  \"instances\": " << opt.instances << ",\n  \"all_pass\": " << (all_pass ? "true" : "false")
     << ",\n  \"checks\": [";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    os << (i ? "," : "") << "\n    {\"suite\": " << json_string(r.suite) << ", \"name\": " << json_string(r.name)
       << ", \"residual\": " << json_number(r.residual) << ", \"tolerance\": " << json_number(r.tolerance)
       << ", \"pass\": " << (r.pass ? "true" : "false") << "}";
  }
  os << "\n  ]\n}\n";
  return os.str();
}

}  // namespace epdiff
