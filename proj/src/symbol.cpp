#include "epdiff/symbol.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "epdiff/errors.hpp"
#include "epdiff/field_io.hpp"

namespace epdiff {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(trim(s), &used);
    if (used != trim(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("cannot parse number '" + s + "' in " + context);
  }
}

std::vector<std::string> split_args(const std::string& args) {
  std::vector<std::string> out;
  std::stringstream ss(args);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double norm2(const Matrix& m) {
  if (m.size() == 1) return std::abs(m(0, 0));
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

double inverse_norm2(const Matrix& m) {
  if (m.size() == 1) {
    const double a = std::abs(m(0, 0));
    return a > 0.0 ? 1.0 / a : std::numeric_limits<double>::infinity();
  }
  const auto sv = Eigen::JacobiSVD<Matrix>(m).singularValues();
  const double smin = sv(sv.size() - 1);
  return smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
}

// Precomputed x-dependence of a symbol on a grid: the value at (point, k) and
// its first x-derivatives.
class Sampler {
 public:
  Sampler(const SymbolSpec& spec, const TorusGrid& grid) : spec_(spec), grid_(grid) {
    if (spec.dim != grid.dim()) throw GridMismatch("symbol dimension does not match grid");
    if (spec.kind == SymbolKind::gridded) {
      if (!spec.table_grid || *spec.table_grid != grid) {
        throw GridMismatch("gridded symbol is tabulated on a different grid");
      }
      return;
    }
    for (const auto& t : spec.terms) {
      Samples s;
      if (t.x_factor) {
        if (t.x_factor->grid() != grid) throw GridMismatch("symbol x-factor lives on a different grid");
        s.value = t.x_factor->samples();
        for (int a = 0; a < grid.dim(); ++a) s.grad.push_back(partial_derivative(*t.x_factor, a).samples());
      }
      samples_.push_back(std::move(s));
    }
  }

  /// a(x_p, k), or ∂_{x^beta_axis} a(x_p, k) when beta_axis >= 0.
  Matrix value(std::size_t p, const Frequency& k, int beta_axis = -1) const {
    const int c = spec_.components;
    if (spec_.kind == SymbolKind::gridded) {
      if (beta_axis < 0) return spec_.table[p * grid_.size() + grid_.index_of(k)];
      return gridded_derivative(p, k, beta_axis);
    }
    Matrix out = Matrix::Zero(c, c);
    for (std::size_t m = 0; m < spec_.terms.size(); ++m) {
      const auto& t = spec_.terms[m];
      double g = 1.0;
      if (!samples_[m].value.empty()) {
        g = beta_axis < 0 ? samples_[m].value[p] : samples_[m].grad[beta_axis][p];
      } else if (beta_axis >= 0) {
        g = 0.0;
      }
      if (g == 0.0) continue;
      out += (g * t.profile(k)) * t.coupling;
    }
    return out;
  }

 private:
  struct Samples {
    std::vector<double> value;
    std::vector<std::vector<double>> grad;
  };

  Matrix gridded_derivative(std::size_t p, const Frequency& k, int axis) const {
    const int c = spec_.components;
    const std::size_t key = grid_.index_of(k) * grid_.dim() + axis;
    auto it = derivative_cache_.find(key);
    if (it == derivative_cache_.end()) {
      // Differentiate real and imaginary parts of each entry in x.
      std::vector<Matrix> column(grid_.size(), Matrix::Zero(c, c));
      std::vector<double> re(grid_.size()), im(grid_.size());
      for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) {
          for (std::size_t q = 0; q < grid_.size(); ++q) {
            const Complex z = spec_.table[q * grid_.size() + grid_.index_of(k)](i, j);
            re[q] = z.real();
            im[q] = z.imag();
          }
          const auto dre = partial_derivative(SpectralField::from_samples(grid_, 1, re), axis).samples();
          const auto dim = partial_derivative(SpectralField::from_samples(grid_, 1, im), axis).samples();
          for (std::size_t q = 0; q < grid_.size(); ++q) column[q](i, j) = Complex(dre[q], dim[q]);
        }
      }
      it = derivative_cache_.emplace(key, std::move(column)).first;
    }
    return it->second[p];
  }

  const SymbolSpec& spec_;
  TorusGrid grid_;
  std::vector<Samples> samples_;
  mutable std::map<std::size_t, std::vector<Matrix>> derivative_cache_;
};

}  // namespace

FrequencyProfile FrequencyProfile::bessel_power(double s) {
  FrequencyProfile p;
  p.kind_ = Kind::bessel_power;
  p.exponent_ = s;
  return p;
}

FrequencyProfile FrequencyProfile::poly(std::vector<double> coeffs) {
  if (coeffs.empty()) throw InvalidParameter("poly profile needs at least one coefficient");
  FrequencyProfile p;
  p.kind_ = Kind::poly;
  p.coeffs_ = std::move(coeffs);
  return p;
}

FrequencyProfile FrequencyProfile::coordinate(int axis) {
  if (axis < 0 || axis > 1) throw InvalidParameter("coordinate profile axis must be 0 or 1");
  FrequencyProfile p;
  p.kind_ = Kind::coordinate;
  p.axis_ = axis;
  return p;
}

FrequencyProfile FrequencyProfile::table(std::map<Frequency, Complex> values, std::string source) {
  FrequencyProfile p;
  p.kind_ = Kind::table;
  p.table_ = std::make_shared<const std::map<Frequency, Complex>>(std::move(values));
  p.source_ = std::move(source);
  return p;
}

Complex FrequencyProfile::operator()(const Frequency& k) const {
  const double k2 = static_cast<double>(k[0]) * k[0] + static_cast<double>(k[1]) * k[1];
  switch (kind_) {
    case Kind::bessel_power:
      return std::pow(1.0 + k2, exponent_);
    case Kind::poly: {
      double v = 0.0, p = 1.0;
      for (double c : coeffs_) {
        v += c * p;
        p *= k2;
      }
      return v;
    }
    case Kind::coordinate:
      return static_cast<double>(k[axis_]);
    case Kind::table: {
      const auto it = table_->find(k);
      return it == table_->end() ? Complex{} : it->second;
    }
  }
  return {};
}

std::string FrequencyProfile::tag() const {
  switch (kind_) {
    case Kind::bessel_power:
      return "bessel_power(" + format_double(exponent_) + ")";
    case Kind::poly: {
      std::string s = "poly(";
      for (std::size_t i = 0; i < coeffs_.size(); ++i) s += (i ? "," : "") + format_double(coeffs_[i]);
      return s + ")";
    }
    case Kind::coordinate:
      return "coordinate(" + std::to_string(axis_) + ")";
    case Kind::table:
      return "grid(" + source_ + ")";
  }
  return {};
}

FrequencyProfile parse_profile(const std::string& raw, const std::filesystem::path& base_dir) {
  const std::string tag = trim(raw);
  const auto open = tag.find('(');
  if (open == std::string::npos || tag.back() != ')') throw ParseError("bad profile tag '" + tag + "'");
  const std::string name = trim(tag.substr(0, open));
  const std::string args = tag.substr(open + 1, tag.size() - open - 2);
  if (name == "bessel_power") return FrequencyProfile::bessel_power(parse_number(args, tag));
  if (name == "poly") {
    std::vector<double> c;
    for (const auto& a : split_args(args)) c.push_back(parse_number(a, tag));
    return FrequencyProfile::poly(std::move(c));
  }
  if (name == "coordinate") return FrequencyProfile::coordinate(static_cast<int>(parse_number(args, tag)));
  if (name == "grid") {
    const auto path = base_dir / trim(args);
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open profile table " + path.string());
    std::string header;
    std::getline(in, header);
    int d = 0;
    if (std::sscanf(header.c_str(), "EPDIFF-PROFILE v1 d=%d", &d) != 1 || (d != 1 && d != 2)) {
      throw ParseError("bad profile table header in " + path.string());
    }
    std::map<Frequency, Complex> values;
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      std::istringstream ls(line);
      Frequency k{0, 0};
      double re = 0.0, im = 0.0;
      ls >> k[0];
      if (d == 2) ls >> k[1];
      ls >> re;
      if (!ls) throw ParseError("malformed profile line in " + path.string());
      if (!(ls >> im)) im = 0.0;
      values[k] = Complex(re, im);
    }
    return FrequencyProfile::table(std::move(values), trim(args));
  }
  throw ParseError("unknown profile '" + name + "'");
}

SymbolSpec SymbolSpec::bessel_power(double s, int dim, int components) {
  return multiplier(FrequencyProfile::bessel_power(s), 2.0 * s, dim, components);
}

SymbolSpec SymbolSpec::multiplier(FrequencyProfile profile, double order, int dim, int components) {
  SymbolSpec spec;
  spec.kind = SymbolKind::multiplier;
  spec.order = order;
  spec.dim = dim;
  spec.components = components;
  spec.terms.push_back({std::nullopt, std::move(profile), Matrix::Identity(components, components)});
  return spec;
}

SymbolSpec SymbolSpec::separable(SpectralField x_factor, FrequencyProfile profile, double order,
                                 int components) {
  if (x_factor.components() != 1) throw ShapeMismatch("symbol x-factor must be scalar");
  SymbolSpec spec;
  spec.kind = SymbolKind::separable;
  spec.order = order;
  spec.dim = x_factor.grid().dim();
  spec.components = components;
  spec.terms.push_back({std::move(x_factor), std::move(profile), Matrix::Identity(components, components)});
  return spec;
}

std::optional<TorusGrid> SymbolSpec::native_grid() const {
  if (kind == SymbolKind::gridded) return table_grid;
  for (const auto& t : terms) {
    if (t.x_factor) return t.x_factor->grid();
  }
  return std::nullopt;
}

SymbolSpec combine(const SymbolSpec& a, const SymbolSpec& b) {
  if (a.kind == SymbolKind::gridded || b.kind == SymbolKind::gridded) {
    throw InvalidParameter("gridded symbols cannot be combined term-wise");
  }
  if (a.dim != b.dim || a.components != b.components) throw ShapeMismatch("symbol shapes differ");
  SymbolSpec out = a;
  out.terms.insert(out.terms.end(), b.terms.begin(), b.terms.end());
  if (b.kind == SymbolKind::separable) out.kind = SymbolKind::separable;
  out.order = std::max(a.order, b.order);
  out.hermitian = a.hermitian && b.hermitian;
  out.positive = a.positive && b.positive;
  out.elliptic = a.elliptic && b.elliptic;
  return out;
}

std::vector<Matrix> symbol_column(const SymbolSpec& spec, const TorusGrid& grid, const Frequency& k) {
  const Sampler sampler(spec, grid);
  std::vector<Matrix> out;
  out.reserve(grid.size());
  for (std::size_t p = 0; p < grid.size(); ++p) out.push_back(sampler.value(p, k));
  return out;
}

ValidationReport validate_symbol(const SymbolSpec& spec, double r, std::optional<TorusGrid> grid) {
  if (!grid) grid = spec.native_grid();
  if (!grid) grid = TorusGrid(spec.dim, 64);
  const Sampler sampler(spec, *grid);
  // Pure multipliers have no x-dependence; one point suffices.
  const std::size_t points = spec.kind == SymbolKind::multiplier ? 1 : grid->size();
  const int c = spec.components;

  ValidationReport rep;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (std::size_t i : grid->band_indices()) {
    const Frequency k = grid->frequency(i);
    const Frequency mk{-k[0], -k[1]};
    const double jk = TorusGrid::japanese(k);
    for (std::size_t p = 0; p < points; ++p) {
      const Matrix a = sampler.value(p, k);
      const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
      rep.hermitian_defect = std::max(rep.hermitian_defect, (a - a.adjoint()).cwiseAbs().maxCoeff() / scale);
      rep.reality_defect =
          std::max(rep.reality_defect, (sampler.value(p, mk) - a.conjugate()).cwiseAbs().maxCoeff() / scale);
      const Matrix h = 0.5 * (a + a.adjoint());
      const double lmin = c == 1 ? h(0, 0).real()
                                 : Eigen::SelfAdjointEigenSolver<Matrix>(h).eigenvalues().minCoeff();
      rep.min_eigenvalue = std::min(rep.min_eigenvalue, lmin);
      rep.ellipticity_constant = std::max(rep.ellipticity_constant, inverse_norm2(a) * std::pow(jk, r));
    }
  }
  rep.hermitian = rep.hermitian_defect <= 1e-12;
  rep.reality = rep.reality_defect <= 1e-12;
  rep.positive = rep.min_eigenvalue > 0.0;
  rep.elliptic = std::isfinite(rep.ellipticity_constant);

  // Symbol-class constants from forward differences in k and spectral x-derivatives.
  std::vector<Frequency> alphas{{0, 0}, {1, 0}, {2, 0}};
  if (spec.dim == 2) alphas.insert(alphas.end(), {{0, 1}, {1, 1}, {0, 2}});
  std::vector<int> betas{-1};
  if (spec.kind != SymbolKind::multiplier) {
    for (int a = 0; a < spec.dim; ++a) betas.push_back(a);
  }
  for (const Frequency& alpha : alphas) {
    const int order_alpha = alpha[0] + alpha[1];
    for (int beta : betas) {
      double worst = 0.0;
      for (std::size_t i : grid->band_indices()) {
        const Frequency k = grid->frequency(i);
        const Frequency top{k[0] + alpha[0], k[1] + alpha[1]};
        if (!grid->in_band(top)) continue;
        for (std::size_t p = 0; p < points; ++p) {
          Matrix diff = Matrix::Zero(c, c);
          for (int m0 = 0; m0 <= alpha[0]; ++m0) {
            for (int m1 = 0; m1 <= alpha[1]; ++m1) {
              const double binom = (alpha[0] == 2 && m0 == 1 ? 2.0 : 1.0) * (alpha[1] == 2 && m1 == 1 ? 2.0 : 1.0);
              const double sign = ((order_alpha - m0 - m1) % 2 == 0) ? 1.0 : -1.0;
              diff += (sign * binom) * sampler.value(p, {k[0] + m0, k[1] + m1}, beta);
            }
          }
          worst = std::max(worst, norm2(diff) / std::pow(TorusGrid::japanese(k), r - order_alpha));
        }
      }
      SymbolClassConstant cc;
      cc.alpha = alpha;
      if (beta >= 0) cc.beta[beta] = 1;
      cc.value = worst;
      rep.class_constants.push_back(cc);
    }
  }
  return rep;
}

namespace {

SymbolSpec read_gridded_table(const std::filesystem::path& path, int components) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open symbol table " + path.string());
  std::string header;
  std::getline(in, header);
  int d = 0, n = 0, c = 0;
  if (std::sscanf(header.c_str(), "EPDIFF-SYMBOL-TABLE v1 d=%d N=%d c=%d", &d, &n, &c) != 3) {
    throw ParseError("bad symbol table header in " + path.string());
  }
  if (c != components) throw ShapeMismatch("symbol table component count does not match [symbol]");
  SymbolSpec spec;
  spec.kind = SymbolKind::gridded;
  spec.dim = d;
  spec.components = c;
  spec.table_grid = TorusGrid(d, n);
  const TorusGrid& g = *spec.table_grid;
  spec.table.assign(g.size() * g.size(), Matrix::Zero(c, c));
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::size_t p = 0;
    Frequency k{0, 0};
    ls >> p >> k[0];
    if (d == 2) ls >> k[1];
    if (!ls || p >= g.size() || !g.in_band(k)) throw ParseError("malformed symbol table line: " + line);
    Matrix m(c, c);
    for (int i = 0; i < c; ++i) {
      for (int j = 0; j < c; ++j) {
        double re = 0.0, im = 0.0;
        ls >> re >> im;
        m(i, j) = Complex(re, im);
      }
    }
    if (!ls) throw ParseError("malformed symbol table line: " + line);
    spec.table[p * g.size() + g.index_of(k)] = m;
  }
  return spec;
}

}  // namespace

SymbolSpec load_symbol(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(std::string("symbol file: ") + e.what());
  }
  const auto base = path.parent_path();
  const auto& sym = tree.get_child_optional("symbol");
  if (!sym) throw ParseError("symbol file has no [symbol] section");
  const std::string kind = sym->get<std::string>("kind", "");
  const int dim = sym->get<int>("dim", 1);
  const int components = sym->get<int>("components", 1);
  const double order = parse_number(sym->get<std::string>("order", "nan"), "symbol.order");
  if (!std::isfinite(order)) throw ParseError("symbol file needs a numeric order");

  SymbolSpec spec;
  if (kind == "gridded") {
    spec = read_gridded_table(base / sym->get<std::string>("table", ""), components);
    if (spec.dim != dim) throw ShapeMismatch("symbol table dimension does not match [symbol]");
  } else if (kind == "multiplier" || kind == "separable") {
    spec.kind = kind == "multiplier" ? SymbolKind::multiplier : SymbolKind::separable;
    spec.dim = dim;
    spec.components = components;
    if (auto p = sym->get_optional<std::string>("profile")) {
      spec.terms.push_back({std::nullopt, parse_profile(*p, base), Matrix::Identity(components, components)});
    }
    for (const auto& [name, section] : tree) {
      if (name.rfind("term", 0) != 0) continue;
      SymbolTerm term;
      term.profile = parse_profile(section.get<std::string>("profile", ""), base);
      term.coupling = Matrix::Identity(components, components) *
                      parse_number(section.get<std::string>("scale", "1"), name + ".scale");
      if (auto xf = section.get_optional<std::string>("x_factor")) {
        if (spec.kind == SymbolKind::multiplier) {
          throw ParseError("multiplier symbols cannot have x-factors (" + name + ")");
        }
        term.x_factor = load_field(base / *xf);
        if (term.x_factor->components() != 1 || term.x_factor->grid().dim() != dim) {
          throw ShapeMismatch("x-factor in " + name + " must be a scalar field on T^" + std::to_string(dim));
        }
      }
      spec.terms.push_back(std::move(term));
    }
    if (spec.terms.empty()) throw ParseError("symbol file defines no terms");
  } else {
    throw ParseError("unknown symbol kind '" + kind + "'");
  }
  spec.order = order;
  spec.hermitian = sym->get<bool>("hermitian", true);
  spec.positive = sym->get<bool>("positive", true);
  spec.elliptic = sym->get<bool>("elliptic", true);
  return spec;
}

}  // namespace epdiff
