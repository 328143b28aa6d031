#include "epdiff/runner.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "epdiff/commutator_lab.hpp"
#include "epdiff/conjugation.hpp"
#include "epdiff/field_io.hpp"
#include "epdiff/geodesic.hpp"
#include "epdiff/random.hpp"

namespace epdiff {

namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_number(const std::string& raw, const std::string& field) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(field, "expected a number, got '" + s + "'");
  }
  return v;
}

int to_integer(const std::string& raw, const std::string& field) {
  const double v = to_number(raw, field);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(field, "expected an integer");
  return static_cast<int>(v);
}

// Splits on `sep` outside parentheses.
std::vector<std::string> split_top(const std::string& s, char sep) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char ch : s) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == sep && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

struct Call {
  std::string name;
  std::vector<std::string> args;
};

Call parse_call(const std::string& raw, const std::string& field) {
  const std::string s = trim(raw);
  const auto open = s.find('(');
  if (open == std::string::npos) return {s, {}};
  if (s.back() != ')') throw ConfigError(field, "malformed expression '" + s + "'");
  Call c{trim(s.substr(0, open)), {}};
  const std::string inner = s.substr(open + 1, s.size() - open - 2);
  if (!trim(inner).empty()) c.args = split_top(inner, ',');
  return c;
}

/// INI reader that remembers which keys were consulted so that anything
/// left over can be rejected as unknown.
class Config {
 public:
  explicit Config(const fs::path& path) : dir_(path.parent_path()) {
    if (!fs::exists(path)) throw ConfigError("config", "file not found: " + path.string());
    try {
      boost::property_tree::read_ini(path.string(), tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError("config", e.message() + " at line " + std::to_string(e.line()));
    }
    for (const auto& [section, body] : tree_) {
      if (!body.data().empty()) throw ConfigError(section, "key outside of any section");
    }
  }

  const fs::path& dir() const { return dir_; }

  bool has(const std::string& section, const std::string& key) const {
    return tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(section + "." + key, '.'))
        .has_value();
  }

  std::optional<std::string> raw(const std::string& section, const std::string& key) {
    used_.insert(section + "." + key);
    const auto child = tree_.get_child_optional(section);
    if (!child) return std::nullopt;
    const auto v = child->get_optional<std::string>(boost::property_tree::ptree::path_type(key, '/'));
    if (!v) return std::nullopt;
    return trim(*v);
  }

  std::string text(const std::string& section, const std::string& key, const std::string& fallback) {
    return raw(section, key).value_or(fallback);
  }

  std::string required(const std::string& section, const std::string& key) {
    auto v = raw(section, key);
    if (!v || v->empty()) throw ConfigError(section + "." + key, "missing");
    return *v;
  }

  double number(const std::string& section, const std::string& key, double fallback) {
    const auto v = raw(section, key);
    return v ? to_number(*v, section + "." + key) : fallback;
  }

  std::optional<double> optional_number(const std::string& section, const std::string& key) {
    const auto v = raw(section, key);
    if (!v) return std::nullopt;
    return to_number(*v, section + "." + key);
  }

  int integer(const std::string& section, const std::string& key, int fallback) {
    const auto v = raw(section, key);
    return v ? to_integer(*v, section + "." + key) : fallback;
  }

  bool flag(const std::string& section, const std::string& key, bool fallback) {
    const auto v = raw(section, key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(section + "." + key, "expected true or false");
  }

  std::vector<double> list(const std::string& section, const std::string& key) {
    std::vector<double> out;
    const auto v = raw(section, key);
    if (!v) return out;
    for (const auto& part : split_top(*v, ',')) out.push_back(to_number(part, section + "." + key));
    return out;
  }

  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      for (const auto& [key, value] : body) {
        if (!used_.contains(section + "." + key)) throw ConfigError(section + "." + key, "unknown key");
      }
    }
  }

 private:
  fs::path dir_;
  boost::property_tree::ptree tree_;
  std::set<std::string> used_;
};

fs::path resolve(const fs::path& base, const std::string& name) {
  const fs::path p(name);
  return p.is_absolute() ? p : base / p;
}

fs::path existing_file(const fs::path& base, const std::string& name, const std::string& field) {
  const fs::path p = resolve(base, name);
  if (!fs::is_regular_file(p)) throw ConfigError(field, "referenced file not found: " + name);
  return p;
}

SpectralField sampled(const TorusGrid& g, int components, int component, auto&& fn) {
  std::vector<double> s(components * g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) s[component * g.size() + i] = fn(g.point(i));
  return SpectralField::from_samples(g, components, s);
}

/// Field catalogue: constant(c...), sine(amp, k[, component[, axis]]),
/// cosine(...), random(amp, decay[, max_mode]), file(path), joined with '+'.
SpectralField make_field(const std::string& expr, const TorusGrid& g, int components, std::uint64_t seed,
                         const fs::path& base, const std::string& field) {
  SpectralField total(g, components);
  std::uint64_t stream = 0;
  for (const auto& term : split_top(expr, '+')) {
    const Call c = parse_call(term, field);
    std::vector<double> a;
    if (c.name != "file") {
      for (const auto& s : c.args) a.push_back(to_number(s, field));
    }
    const auto need = [&](std::size_t lo, std::size_t hi) {
      if (a.size() < lo || a.size() > hi) throw ConfigError(field, c.name + " takes " + std::to_string(lo) + " to " +
                                                                       std::to_string(hi) + " arguments");
    };
    if (c.name == "constant") {
      need(1, components);
      if (a.size() != 1 && a.size() != static_cast<std::size_t>(components)) {
        throw ConfigError(field, "constant needs 1 or " + std::to_string(components) + " values");
      }
      std::vector<double> v(components, a[0]);
      if (a.size() > 1) v = a;
      total += SpectralField::constant(g, v);
    } else if (c.name == "sine" || c.name == "cosine") {
      need(2, 4);
      const int comp = a.size() > 2 ? static_cast<int>(a[2]) : 0;
      const int axis = a.size() > 3 ? static_cast<int>(a[3]) : 0;
      if (comp < 0 || comp >= components) throw ConfigError(field, "component out of range");
      if (axis < 0 || axis >= g.dim()) throw ConfigError(field, "axis out of range");
      if (a[1] != std::floor(a[1]) || std::abs(a[1]) > g.max_frequency()) {
        throw ConfigError(field, "mode must be an integer inside the band");
      }
      const bool is_sine = c.name == "sine";
      total += sampled(g, components, comp, [&](Point x) {
        const double arg = 2 * pi * a[1] * x[axis];
        return a[0] * (is_sine ? std::sin(arg) : std::cos(arg));
      });
    } else if (c.name == "random") {
      need(2, 3);
      RandomFieldOptions opt{.decay = a[1], .max_mode = a.size() > 2 ? static_cast<int>(a[2]) : -1,
                             .include_mean = false};
      auto f = random_field(g, components, seed, 1000 + stream++, opt);
      const double norm = sobolev_norm(f, 0.0);
      if (norm > 0.0) f *= a[0] / norm;
      total += f;
    } else if (c.name == "file") {
      if (c.args.size() != 1) throw ConfigError(field, "file takes one path");
      const auto f = load_field(existing_file(base, c.args[0], field));
      if (f.grid() != g || f.components() != components) {
        throw ConfigError(field, "field file does not match the grid or component count");
      }
      total += f;
    } else {
      throw ConfigError(field, "unknown field expression '" + c.name + "'");
    }
  }
  return total;
}

SpectralField resample(const SpectralField& f, const TorusGrid& g) {
  SpectralField out(g, f.components());
  const TorusGrid& src = f.grid();
  for (int c = 0; c < f.components(); ++c) {
    for (std::size_t idx : src.band_indices()) {
      const Frequency k = src.frequency(idx);
      if (g.in_band(k)) out.set_mode(c, k, f.at(c, idx));
    }
  }
  return out;
}

struct Experiment {
  std::string kind;
  std::uint64_t seed = 0;
  fs::path output_dir;
  TorusGrid grid{1, 32};
  SymbolSpec symbol;
  SolverConfig solver;
  bool snapshots = true;
  std::string initial_expr;
  std::optional<SpectralField> initial;
};

const std::set<std::string>& run_kinds() {
  static const std::set<std::string> kinds{"geodesic_eulerian", "geodesic_lagrangian", "shoot",
                                           "verify_commutators", "verify_conjugation", "probe_boundedness",
                                           "convergence"};
  return kinds;
}

TorusGrid read_grid(Config& cfg, int n_override = 0) {
  const int dim = cfg.integer("grid", "dim", 1);
  const int n = n_override > 0 ? n_override : cfg.integer("grid", "n", 32);
  if (dim != 1 && dim != 2) throw ConfigError("grid.dim", "must be 1 or 2");
  if (n < 8 || n % 2 != 0) throw ConfigError("grid.n", "must be even and at least 8");
  if (n > (dim == 1 ? 4096 : 256)) throw ConfigError("grid.n", "exceeds the supported size");
  return TorusGrid(dim, n);
}

SymbolSpec read_symbol(Config& cfg, const TorusGrid& g) {
  const auto file = cfg.raw("symbol", "file");
  const auto s = cfg.optional_number("symbol", "s");
  if (file && s) throw ConfigError("symbol.s", "give either s or file, not both");
  SymbolSpec spec = SymbolSpec::bessel_power(s.value_or(1.0), g.dim(), g.dim());
  if (s && *s <= 0.0) throw ConfigError("symbol.s", "must be positive");
  if (file) {
    try {
      spec = load_symbol(existing_file(cfg.dir(), *file, "symbol.file"));
    } catch (const ConfigError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ConfigError("symbol.file", e.what());
    }
    if (spec.dim != g.dim()) throw ConfigError("symbol.file", "symbol dimension does not match grid.dim");
    if (auto native = spec.native_grid(); native && *native != g) {
      throw ConfigError("symbol.file", "symbol grid does not match [grid]");
    }
  }
  return spec;
}

SolverConfig read_solver(Config& cfg, const TorusGrid& g, const SymbolSpec& symbol) {
  SolverConfig s;
  s.grid = g;
  s.inertia = symbol;
  s.dt = cfg.number("solver", "dt", 1e-3);
  s.t_end = cfg.number("solver", "t_end", 1.0);
  s.cadence = cfg.integer("solver", "cadence", 10);
  s.growth_limit = cfg.number("solver", "growth_limit", 1e6);
  s.cfl_limit = cfg.number("solver", "cfl_limit", 0.5);
  s.q = cfg.optional_number("solver", "q");
  const std::string integ = cfg.text("solver", "integrator", "rk4");
  if (integ == "rk4") {
    s.integrator = Integrator::rk4;
  } else if (integ == "midpoint") {
    s.integrator = Integrator::midpoint;
  } else {
    throw ConfigError("solver.integrator", "must be rk4 or midpoint");
  }
  if (!(s.dt > 0.0)) throw ConfigError("solver.dt", "must be positive");
  if (!(s.t_end > 0.0)) throw ConfigError("solver.t_end", "must be positive");
  if (s.dt > s.t_end) throw ConfigError("solver.dt", "must not exceed t_end");
  if (s.t_end / s.dt > 1e7) throw ConfigError("solver.dt", "too many steps");
  if (s.cadence < 1) throw ConfigError("solver.cadence", "must be at least 1");
  if (!(s.growth_limit > 1.0)) throw ConfigError("solver.growth_limit", "must exceed 1");
  if (!(s.cfl_limit > 0.0)) throw ConfigError("solver.cfl_limit", "must be positive");
  if (s.q && !(*s.q > g.dim() / 2.0)) throw ConfigError("solver.q", "must exceed d/2");
  try {
    s.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError("symbol", e.what());
  }
  return s;
}

Experiment read_common(Config& cfg, const fs::path& config_path) {
  Experiment e;
  e.kind = cfg.required("run", "kind");
  if (!run_kinds().contains(e.kind)) throw ConfigError("run.kind", "unknown run kind '" + e.kind + "'");
  const double seed = cfg.number("run", "seed", 0.0);
  if (seed < 0 || seed != std::floor(seed) || seed > 9e15) throw ConfigError("run.seed", "must be a non-negative integer");
  e.seed = static_cast<std::uint64_t>(seed);
  const std::string out = cfg.text("run", "output", config_path.stem().string());
  if (out.empty()) throw ConfigError("run.output", "must not be empty");
  e.output_dir = resolve(output_root(), out);
  return e;
}

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  write_file_atomically(p, s);
}

std::string json_list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + json_number(v[i]);
  return s + "]";
}

std::string pad_index(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 6 ? 6 - s.size() : 0, '0') + s;
}

class JsonObject {
 public:
  JsonObject& add(const std::string& key, const std::string& raw_value) {
    items_.emplace_back(key, raw_value);
    return *this;
  }
  JsonObject& num(const std::string& key, double v) { return add(key, json_number(v)); }
  JsonObject& str(const std::string& key, const std::string& v) { return add(key, json_string(v)); }
  JsonObject& boolean(const std::string& key, bool v) { return add(key, v ? "true" : "false"); }
  JsonObject& integer(const std::string& key, long long v) { return add(key, std::to_string(v)); }

  std::string dump() const {
    std::string s = "{";
    for (std::size_t i = 0; i < items_.size(); ++i) {
      s += (i ? ",\n  " : "\n  ") + json_string(items_[i].first) + ": " + items_[i].second;
    }
    return s + "\n}\n";
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

std::string trajectory_summary(const Experiment& e, const GeodesicTrajectory& traj) {
  const auto& d = traj.diagnostics;
  double drift = 0.0, mom = 0.0, growth = 0.0;
  for (const auto& x : d) {
    drift = std::max(drift, std::abs(x.energy - d.front().energy));
    for (std::size_t c = 0; c < x.momentum_int.size(); ++c) {
      mom = std::max(mom, std::abs(x.momentum_int[c] - d.front().momentum_int[c]));
    }
    growth = std::max(growth, x.hq_norm);
  }
  JsonObject o;
  o.str("status", "ok").str("kind", e.kind).integer("dim", e.grid.dim()).integer("N", e.grid.n());
  o.num("dt", e.solver.t_end / e.solver.steps()).num("t_end", e.solver.t_end).integer("steps", e.solver.steps());
  o.str("integrator", e.solver.integrator == Integrator::rk4 ? "rk4" : "midpoint");
  o.num("hq_index", e.solver.diagnostic_q());
  o.num("energy_initial", d.front().energy).num("energy_final", d.back().energy);
  o.num("energy_drift_relative", d.front().energy == 0.0 ? drift : drift / d.front().energy);
  o.num("momentum_drift", mom);
  o.num("hq_growth", d.front().hq_norm == 0.0 ? 1.0 : growth / d.front().hq_norm);
  o.integer("records", static_cast<long long>(d.size()));
  return o.dump();
}

std::string run_geodesic(const Experiment& e) {
  const bool lagrangian = e.kind == "geodesic_lagrangian";
  const auto traj = lagrangian ? integrate_lagrangian(*e.initial, e.solver) : integrate_eulerian(*e.initial, e.solver);
  write_text(e.output_dir / "trajectory.csv", traj.to_csv());
  if (e.snapshots) {
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
      const auto& s = traj.states[i];
      const fs::path dir = e.output_dir / "snapshots";
      fs::create_directories(dir);
      save_field(dir / ("u_" + pad_index(i) + ".field"), *s.u);
      if (lagrangian) save_field(dir / ("phi_" + pad_index(i) + ".field"), s.phi->displacement());
    }
  }
  const auto& last = traj.final_state();
  save_field(e.output_dir / "final_u.field", *last.u);
  if (lagrangian) {
    save_field(e.output_dir / "final_phi.field", last.phi->displacement());
    save_field(e.output_dir / "final_v.field", *last.v);
  }
  const std::string summary = trajectory_summary(e, traj);
  write_text(e.output_dir / "summary.json", summary);
  return summary;
}

struct ShootFailure : NumericalError {
  using NumericalError::NumericalError;
};

std::string run_shoot(Config& cfg, const Experiment& e) {
  ShootOptions opt;
  opt.max_iter = cfg.integer("shoot", "max_iter", opt.max_iter);
  opt.step = cfg.number("shoot", "step", opt.step);
  opt.tol = cfg.number("shoot", "tol", opt.tol);
  opt.max_mode = cfg.integer("shoot", "max_mode", opt.max_mode);
  opt.fd_step = cfg.number("shoot", "fd_step", opt.fd_step);
  if (opt.max_iter < 0) throw ConfigError("shoot.max_iter", "must be non-negative");
  if (!(opt.step > 0.0)) throw ConfigError("shoot.step", "must be positive");
  if (!(opt.tol > 0.0)) throw ConfigError("shoot.tol", "must be positive");
  if (opt.max_mode < 0 || opt.max_mode > e.grid.max_frequency()) throw ConfigError("shoot.max_mode", "out of range");
  if (!(opt.fd_step > 0.0)) throw ConfigError("shoot.fd_step", "must be positive");

  const std::string target_expr = cfg.required("shoot", "target");
  const Call t = parse_call(target_expr, "shoot.target");
  std::optional<Diffeo> target;
  std::optional<SpectralField> generator;
  if (t.name == "translation") {
    if (t.args.empty() || t.args.size() > static_cast<std::size_t>(e.grid.dim())) {
      throw ConfigError("shoot.target", "translation needs one value per axis");
    }
    Point c{0.0, 0.0};
    for (std::size_t i = 0; i < t.args.size(); ++i) c[i] = to_number(t.args[i], "shoot.target");
    target = Diffeo::translation(e.grid, c);
  } else if (t.name == "file") {
    if (t.args.size() != 1) throw ConfigError("shoot.target", "file takes one path");
    const auto f = load_field(existing_file(cfg.dir(), t.args[0], "shoot.target"));
    if (f.grid() != e.grid || f.components() != e.grid.dim()) {
      throw ConfigError("shoot.target", "displacement does not match the grid");
    }
    target = Diffeo(f);
  } else if (t.name == "geodesic") {
    if (!e.initial) throw ConfigError("initial.u", "geodesic target needs an initial velocity");
    generator = *e.initial;
  } else {
    throw ConfigError("shoot.target", "expected translation(...), file(...) or geodesic");
  }
  cfg.reject_unknown();
  if (generator) target = *integrate_lagrangian(*generator, e.solver).final_state().phi;

  const auto res = shoot(*target, e.solver, opt);
  save_field(e.output_dir / "u0.field", res.u0);
  JsonObject o;
  o.str("status", res.converged ? "ok" : "not_converged").str("kind", e.kind);
  o.num("residual", res.residual).integer("iterations", res.iterations).boolean("converged", res.converged);
  o.num("u0_l2", sobolev_norm(res.u0, 0.0));
  if (generator) o.num("generator_gap_l2", sobolev_norm(res.u0 - *generator, 0.0));
  const std::string summary = o.dump();
  write_text(e.output_dir / "summary.json", summary);
  if (!res.converged) throw ShootFailure("shooting did not reach tol; best residual " + format_double(res.residual));
  return summary;
}

struct ChecksFailed : NumericalError {
  using NumericalError::NumericalError;
};

std::string run_checks(const std::vector<std::string>& suites, const VerifyOptions& opt, const fs::path& out) {
  std::vector<CheckResult> all;
  for (const auto& s : suites) {
    auto part = run_verify_suite(s, opt);
    all.insert(all.end(), part.begin(), part.end());
  }
  const std::string report = verify_report_json(all, opt);
  write_text(out, report);
  const auto failed = std::ranges::count_if(all, [](const CheckResult& r) { return !r.pass; });
  if (failed > 0) throw ChecksFailed(std::to_string(failed) + " checks failed; see the report");
  return report;
}

std::string run_verify_kind(Config& cfg, const Experiment& e) {
  VerifyOptions opt;
  opt.seed = e.seed;
  opt.n = e.grid.n();
  opt.order = cfg.integer("verify", "n", 2);
  opt.instances = cfg.integer("verify", "instances", 5);
  if (opt.order < 1 || opt.order > 2) throw ConfigError("verify.n", "must be 1 or 2");
  if (opt.instances < 1 || opt.instances > 20) throw ConfigError("verify.instances", "must be within [1, 20]");
  if (e.grid.dim() != 1) throw ConfigError("grid.dim", "verification runs use dim = 1 (two-dimensional checks are built in)");
  if (opt.n < 32 || opt.n > 128) throw ConfigError("grid.n", "verification runs need 32 <= n <= 128");
  cfg.reject_unknown();
  const std::vector<std::string> suites = e.kind == "verify_commutators"
                                              ? std::vector<std::string>{"commutators", "splitting", "appendix"}
                                              : std::vector<std::string>{"conjugation"};
  return run_checks(suites, opt, e.output_dir / "report.json");
}

std::string run_probe(Config& cfg, const Experiment& e) {
  const int n = cfg.integer("probe", "n", 1);
  const double q = cfg.number("probe", "q", 2.0);
  const double r = cfg.number("probe", "r", 1.0);
  const int samples = cfg.integer("probe", "samples", 200);
  const double amplitude = cfg.number("probe", "amplitude", 1.0);
  std::vector<double> grids = cfg.list("probe", "grids");
  if (n < 1 || n > 3) throw ConfigError("probe.n", "must be within [1, 3]");
  if (!(q > 1.0 + e.grid.dim() / 2.0)) throw ConfigError("probe.q", "must exceed 1 + d/2");
  if (!(r >= 1.0 && r <= q)) throw ConfigError("probe.r", "must satisfy 1 <= r <= q");
  if (samples < 1 || samples > 100000) throw ConfigError("probe.samples", "must be within [1, 100000]");
  if (!(amplitude >= 0.0)) throw ConfigError("probe.amplitude", "must be non-negative");
  if (grids.empty()) grids.push_back(e.grid.n());
  for (double g : grids) {
    if (g != std::floor(g) || g < 8 || static_cast<int>(g) % 2 != 0) {
      throw ConfigError("probe.grids", "entries must be even integers >= 8");
    }
  }
  if (e.symbol.native_grid() && grids.size() > 1) {
    throw ConfigError("probe.grids", "a grid-bound symbol cannot be refined");
  }
  cfg.reject_unknown();

  std::vector<double> ns, maxima;
  std::string reports = "[";
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const TorusGrid g(e.grid.dim(), static_cast<int>(grids[i]));
    const auto rep = boundedness_probe(realize(e.symbol, g), n, q, r, samples, e.seed, amplitude);
    reports += (i ? ", " : "") + rep.to_json();
    ns.push_back(g.n());
    maxima.push_back(rep.max_ratio);
  }
  reports += "]";
  JsonObject o;
  o.str("status", "ok").str("kind", e.kind).add("reports", reports);
  if (maxima.size() > 1) {
    const auto [lo, hi] = std::ranges::minmax(maxima);
    o.num("max_ratio_spread", lo > 0.0 ? hi / lo - 1.0 : 0.0);
    o.num("log_n_slope", lo > 0.0 ? loglog_slope(ns, maxima) : 0.0);
  }
  const std::string summary = o.dump();
  write_text(e.output_dir / "probe.json", summary);
  return summary;
}

std::string convergence_body(Config& cfg, Experiment& e) {
  const bool has_dt = cfg.has("ladder", "dt"), has_n = cfg.has("ladder", "n");
  if (has_dt == has_n) throw ConfigError("ladder", "give exactly one of dt or n");
  const std::string key = has_dt ? "dt" : "n";
  const std::vector<double> ladder = cfg.list("ladder", key);
  const std::string field = "ladder." + key;
  if (ladder.size() < 3) throw ConfigError(field, "needs at least 3 levels");
  for (std::size_t i = 1; i < ladder.size(); ++i) {
    if (has_dt && !(ladder[i] < ladder[i - 1])) throw ConfigError(field, "must be strictly decreasing");
    if (has_n && !(ladder[i] > ladder[i - 1])) throw ConfigError(field, "must be strictly increasing");
  }
  std::vector<TorusGrid> grids;
  for (double v : ladder) {
    if (has_dt && !(v > 0.0 && v <= e.solver.t_end)) throw ConfigError(field, "entries must lie in (0, t_end]");
    if (has_n) {
      if (v != std::floor(v) || v < 8 || static_cast<int>(v) % 2 != 0) {
        throw ConfigError(field, "entries must be even integers >= 8");
      }
      grids.emplace_back(e.grid.dim(), static_cast<int>(v));
    }
  }
  if (has_n && e.initial_expr.find("file") != std::string::npos) {
    throw ConfigError("initial.u", "an N ladder needs a closed-form initial field");
  }
  if (has_n && e.symbol.native_grid()) throw ConfigError("symbol.file", "an N ladder needs a grid-free symbol");
  cfg.reject_unknown();

  std::vector<SpectralField> finals;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    SolverConfig s = e.solver;
    SpectralField u0 = *e.initial;
    if (has_dt) {
      s.dt = ladder[i];
    } else {
      s.grid = grids[i];
      u0 = make_field(e.initial_expr, grids[i], grids[i].dim(), e.seed, cfg.dir(), "initial.u");
    }
    finals.push_back(*integrate_eulerian(u0, s).final_state().u);
  }
  const SpectralField& ref = finals.back();
  std::vector<double> errors, levels(ladder.begin(), ladder.end() - 1);
  for (std::size_t i = 0; i + 1 < finals.size(); ++i) {
    errors.push_back(sobolev_norm(resample(finals[i], ref.grid()) - ref, 0.0));
  }
  std::vector<double> ratios;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    ratios.push_back(errors[i + 1] > 0.0 ? errors[i] / errors[i + 1] : INFINITY);
  }
  const bool positive = std::ranges::all_of(errors, [](double x) { return x > 0.0; });
  double order = positive ? loglog_slope(levels, errors) : NAN;
  if (has_n) order = -order;

  std::string csv = "level," + key + ",error\n";
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    csv += std::to_string(i) + "," + format_double(ladder[i]) + "," +
           (i < errors.size() ? format_double(errors[i]) : std::string("0")) + "\n";
  }
  write_text(e.output_dir / "convergence.csv", csv);
  JsonObject o;
  o.str("status", "ok").str("kind", "convergence").str("ladder", key);
  o.add("levels", json_list(ladder)).add("errors", json_list(errors)).add("error_ratios", json_list(ratios));
  o.num("fitted_order", order);
  o.str("reference", "finest level");
  const std::string summary = o.dump();
  write_text(e.output_dir / "orders.json", summary);
  return summary;
}

std::string error_type(const std::exception& ex) {
  if (dynamic_cast<const ConfigError*>(&ex)) return "ConfigError";
  if (dynamic_cast<const GridMismatch*>(&ex)) return "GridMismatch";
  if (dynamic_cast<const ShapeMismatch*>(&ex)) return "ShapeMismatch";
  if (dynamic_cast<const RealityViolation*>(&ex)) return "RealityViolation";
  if (dynamic_cast<const ParseError*>(&ex)) return "ParseError";
  if (dynamic_cast<const InvalidParameter*>(&ex)) return "InvalidParameter";
  if (dynamic_cast<const ValidationError*>(&ex)) return "ValidationError";
  if (dynamic_cast<const BlowUpSuspected*>(&ex)) return "BlowUpSuspected";
  if (dynamic_cast<const JacobianViolation*>(&ex)) return "JacobianViolation";
  if (dynamic_cast<const InversionFailure*>(&ex)) return "InversionFailure";
  if (dynamic_cast<const SingularOperator*>(&ex)) return "SingularOperator";
  if (dynamic_cast<const ShootFailure*>(&ex)) return "ShootNotConverged";
  if (dynamic_cast<const ChecksFailed*>(&ex)) return "ChecksFailed";
  if (dynamic_cast<const NumericalError*>(&ex)) return "NumericalError";
  return "InternalError";
}

RunOutcome failure(const std::exception& ex, int code, const fs::path& out_dir) {
  JsonObject o;
  o.str("status", "error").integer("exit_code", code).str("error", error_type(ex)).str("message", ex.what());
  if (const auto* c = dynamic_cast<const ConfigError*>(&ex)) o.str("field", c->field());
  if (const auto* b = dynamic_cast<const BlowUpSuspected*>(&ex)) {
    o.num("time", b->time()).add("norm_history", json_list(b->norm_history()));
  }
  if (const auto* j = dynamic_cast<const JacobianViolation*>(&ex)) o.num("min_det", j->min_det());
  if (const auto* i = dynamic_cast<const InversionFailure*>(&ex)) o.num("residual", i->residual());
  if (const auto* s = dynamic_cast<const SingularOperator*>(&ex)) o.num("sigma_min", s->smallest_singular_value());
  RunOutcome r{code, out_dir, o.dump()};
  if (!out_dir.empty()) {
    try {
      write_text(out_dir / "error.json", r.json);
    } catch (const std::exception&) {
      r.output_dir.clear();
    }
  }
  return r;
}

RunOutcome guarded(const std::function<std::string(fs::path&)>& body) {
  fs::path out_dir;
  try {
    std::string json = body(out_dir);
    return {kExitOk, out_dir, std::move(json)};
  } catch (const ValidationError& ex) {
    return failure(ex, kExitValidation, out_dir);
  } catch (const NumericalError& ex) {
    return failure(ex, kExitNumerical, out_dir);
  } catch (const std::exception& ex) {
    return failure(ex, kExitNumerical, out_dir);
  }
}

Experiment load_experiment(Config& cfg, const fs::path& path) {
  Experiment e = read_common(cfg, path);
  e.grid = read_grid(cfg);
  e.symbol = read_symbol(cfg, e.grid);
  const bool dynamic = e.kind.starts_with("geodesic") || e.kind == "shoot" || e.kind == "convergence";
  if (dynamic) {
    e.solver = read_solver(cfg, e.grid, e.symbol);
    e.snapshots = cfg.flag("output", "snapshots", true);
    e.initial_expr = cfg.text("initial", "u", "");
    if (e.initial_expr.empty() && e.kind != "shoot") throw ConfigError("initial.u", "missing");
    if (!e.initial_expr.empty()) {
      e.initial = make_field(e.initial_expr, e.grid, e.grid.dim(), e.seed, cfg.dir(), "initial.u");
    }
  }
  return e;
}

}  // namespace

fs::path output_root() {
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return fs::path(env);
  return fs::current_path();
}

RunOutcome run_experiment(const fs::path& config_path) {
  return guarded([&](fs::path& out_dir) {
    Config cfg(config_path);
    Experiment e = load_experiment(cfg, config_path);
    out_dir = e.output_dir;
    if (e.kind == "convergence") return convergence_body(cfg, e);
    if (e.kind == "verify_commutators" || e.kind == "verify_conjugation") return run_verify_kind(cfg, e);
    if (e.kind == "probe_boundedness") return run_probe(cfg, e);
    if (e.kind == "shoot") return run_shoot(cfg, e);
    cfg.reject_unknown();
    return run_geodesic(e);
  });
}

RunOutcome run_convergence(const fs::path& config_path) {
  return guarded([&](fs::path& out_dir) {
    Config cfg(config_path);
    Experiment e = load_experiment(cfg, config_path);
    out_dir = e.output_dir;
    if (e.kind != "convergence" && !e.kind.starts_with("geodesic")) {
      throw ConfigError("run.kind", "convergence studies need a geodesic or convergence config");
    }
    return convergence_body(cfg, e);
  });
}

RunOutcome run_verify(const VerifyOptions& opt, const std::optional<std::string>& suite) {
  std::vector<CheckResult> all;
  RunOutcome early = guarded([&](fs::path&) {
    opt.validate();
    std::vector<std::string> suites = verify_suite_names();
    if (suite) {
      if (std::ranges::find(suites, *suite) == suites.end()) throw InvalidParameter("unknown suite '" + *suite + "'");
      suites = {*suite};
    }
    for (const auto& s : suites) {
      auto part = run_verify_suite(s, opt);
      all.insert(all.end(), part.begin(), part.end());
    }
    return std::string();
  });
  if (early.exit_code != kExitOk) return early;
  std::string name = "verify-seed" + std::to_string(opt.seed);
  if (suite) name += "-" + *suite;
  RunOutcome r{kExitOk, output_root(), verify_report_json(all, opt)};
  write_text(r.output_dir / (name + ".json"), r.json);
  if (!std::ranges::all_of(all, &CheckResult::pass)) r.exit_code = kExitNumerical;
  return r;
}

}  // namespace epdiff
