#include "epdiff/commutator_lab.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "epdiff/errors.hpp"
#include "epdiff/field_io.hpp"
#include "epdiff/random.hpp"
#include "fft.hpp"

namespace epdiff {

namespace {

Frequency add(const Frequency& a, const Frequency& b) { return {a[0] + b[0], a[1] + b[1]}; }

Frequency unit(int axis) {
  Frequency e{0, 0};
  e[axis] = 1;
  return e;
}

void check_same_grid(std::span<const SpectralField> fs, const TorusGrid& g) {
  for (const auto& f : fs) {
    if (f.grid() != g) throw GridMismatch();
  }
}

SpectralField product(std::span<const SpectralField> fs) {
  SpectralField out = fs[0];
  for (std::size_t i = 1; i < fs.size(); ++i) out = pointwise_multiply(out, fs[i]);
  return out;
}

// Multiplication by the product of the fields; identity for an empty list.
SpectralOperator product_op(const TorusGrid& g, std::span<const SpectralField> fs, int components) {
  if (fs.empty()) return SpectralOperator::identity(g, components);
  return SpectralOperator::multiplication(product(fs), components);
}

SpectralField slot_field(const FieldSlot& s, std::span<const SpectralField> us) {
  if (s.var < 0 || static_cast<std::size_t>(s.var) >= us.size()) throw ArityMismatch("slot refers to a missing argument");
  SpectralField f = us[s.var].component(s.component);
  if (s.derivative_axis >= 0) f = partial_derivative(f, s.derivative_axis);
  return f;
}

std::vector<SpectralField> slot_fields(const std::vector<FieldSlot>& slots, std::span<const SpectralField> us) {
  std::vector<SpectralField> out;
  out.reserve(slots.size());
  for (const auto& s : slots) out.push_back(slot_field(s, us));
  return out;
}

SpectralOperator derivative_power(const TorusGrid& g, const Frequency& gamma, int components) {
  SpectralOperator out = SpectralOperator::identity(g, components);
  for (int j = 0; j < g.dim(); ++j) {
    for (int m = 0; m < gamma[j]; ++m) out = out * SpectralOperator::derivative(g, j, components);
  }
  return out;
}

// Rec^j of a multiplication block. Plain slots cancel; a slot ∂_p g leaves
// −(∂_p f)(∂_j g) with f the new argument.
std::vector<std::pair<std::vector<FieldSlot>, double>> rec_mult_block(const std::vector<FieldSlot>& block,
                                                                       const FieldSlot& f, int axis) {
  std::vector<std::pair<std::vector<FieldSlot>, double>> out;
  for (std::size_t k = 0; k < block.size(); ++k) {
    if (block[k].derivative_axis < 0) continue;
    std::vector<FieldSlot> b = block;
    const int p = b[k].derivative_axis;
    b[k].derivative_axis = axis;
    b.push_back({f.var, f.component, p});
    out.emplace_back(std::move(b), -1.0);
  }
  return out;
}

std::vector<TermDescriptor> rec_term(const TermDescriptor& t, int new_var, int axis) {
  const FieldSlot f{new_var, axis, -1};
  std::vector<TermDescriptor> out;
  const auto push = [&](TermDescriptor d, double sign) {
    d.coefficient *= sign;
    out.push_back(std::move(d));
  };

  for (auto& [block, sign] : rec_mult_block(t.multiplied, f, axis)) {
    TermDescriptor d = t;
    d.multiplied = block;
    push(d, sign);
  }

  if (t.type == TermDescriptor::Type::I) {
    TermDescriptor a = t;
    a.multiplied.push_back(f);
    a.ad_alpha = add(a.ad_alpha, unit(axis));
    push(a, 1.0);

    TermDescriptor b = t;
    b.type = TermDescriptor::Type::II;
    b.commuted = {f};
    b.differentiated.clear();
    b.right_alpha = {0, 0};
    b.trailing_axis = axis;
    push(b, 1.0);
    return out;
  }

  // M1 ∘ S_{m2,B} ∘ M3 ∘ D_i, B = ad_D^α A ∘ D^γ; Rec^j(S) by the commutator lemma.
  TermDescriptor a = t;
  a.multiplied.push_back(f);
  a.ad_alpha = add(a.ad_alpha, unit(axis));
  push(a, 1.0);

  TermDescriptor b = t;
  b.commuted.push_back(f);
  b.right_alpha = add(b.right_alpha, unit(axis));
  b.base_order += 1.0;
  push(b, 1.0);

  TermDescriptor c = t;
  c.differentiated.push_back({new_var, axis, axis});
  push(c, 1.0);

  for (auto& [block, sign] : rec_mult_block(t.differentiated, f, axis)) {
    TermDescriptor d = t;
    d.differentiated = block;
    push(d, sign);
  }

  TermDescriptor e = t;
  e.differentiated.push_back({new_var, axis, t.trailing_axis});
  e.trailing_axis = axis;
  push(e, -1.0);
  return out;
}

void merge_into(std::vector<TermDescriptor>& acc, TermDescriptor t) {
  t.canonicalize();
  for (auto& a : acc) {
    if (a.same_shape(t)) {
      a.coefficient += t.coefficient;
      return;
    }
  }
  acc.push_back(std::move(t));
}

std::string slots_text(const std::vector<FieldSlot>& slots) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (i) os << ',';
    const auto& s = slots[i];
    if (s.derivative_axis >= 0) os << 'd' << s.derivative_axis;
    os << 'u' << s.var << '^' << s.component;
  }
  os << ']';
  return os.str();
}

std::string multi_index_text(const Frequency& a) {
  return "(" + std::to_string(a[0]) + "," + std::to_string(a[1]) + ")";
}

double vector_norm(const Matrix& m) { return m.norm(); }

std::vector<Eigen::Index> window_indices(const TorusGrid& g, int components, int window) {
  std::vector<Eigen::Index> idx;
  const auto& band = g.band_indices();
  const std::size_t nb = band.size();
  for (int c = 0; c < components; ++c) {
    for (std::size_t p = 0; p < nb; ++p) {
      if (max_norm(g.frequency(band[p]), g.dim()) <= window) idx.push_back(static_cast<Eigen::Index>(c * nb + p));
    }
  }
  return idx;
}

}  // namespace

SpectralOperator mult_op(std::span<const SpectralField> fs, int components) {
  if (fs.empty()) throw InvalidParameter("mult_op needs at least one field");
  check_same_grid(fs, fs[0].grid());
  for (const auto& f : fs) {
    if (f.components() != 1) throw ShapeMismatch("mult_op takes scalar fields");
  }
  return product_op(fs[0].grid(), fs, components);
}

SpectralOperator nested_commutator(std::span<const SpectralField> fs, const SpectralOperator& p) {
  check_same_grid(fs, p.grid());
  SpectralOperator out = p;
  for (std::size_t i = fs.size(); i-- > 0;) {
    out = commutator(SpectralOperator::multiplication(fs[i], p.components()), out);
  }
  return out;
}

SpectralField nested_commutator_apply(std::span<const SpectralField> fs, const SpectralOperator& p,
                                      const SpectralField& w) {
  check_same_grid(fs, p.grid());
  if (fs.empty()) return p.apply(w);
  const auto rest = fs.subspan(1);
  return scale_by(fs[0], nested_commutator_apply(rest, p, w)) -
         nested_commutator_apply(rest, p, scale_by(fs[0], w));
}

SpectralOperator rec_j(const MultilinearMap& pn, std::span<const SpectralField> fs, int axis) {
  if (pn.arity < 0 || fs.size() != static_cast<std::size_t>(pn.arity) + 1) {
    throw ArityMismatch("rec_j needs arity + 1 fields");
  }
  const SpectralField& f = fs.back();
  const TorusGrid& g = f.grid();
  if (axis < 0 || axis >= g.dim()) throw InvalidParameter("axis out of range");
  const auto args = fs.first(fs.size() - 1);
  const SpectralOperator base = pn.eval(args);
  const int c = base.components();
  const auto fd = SpectralOperator::multiplication(f, c) * SpectralOperator::derivative(g, axis, c);
  SpectralOperator out = commutator(fd, base);
  std::vector<SpectralField> sub(args.begin(), args.end());
  for (std::size_t k = 0; k < sub.size(); ++k) {
    const SpectralField keep = sub[k];
    sub[k] = pointwise_multiply(f, partial_derivative(keep, axis));
    out = out - pn.eval(sub);
    sub[k] = keep;
  }
  return out.with_order(base.order());
}

SpectralField covariant_derivative(const SpectralField& u, const SpectralField& v) {
  const TorusGrid& g = u.grid();
  if (v.grid() != g) throw GridMismatch();
  if (u.components() != g.dim()) throw ShapeMismatch("covariant derivative needs a vector field with d components");
  SpectralField out(g, v.components());
  for (int j = 0; j < g.dim(); ++j) out += scale_by(u.component(j), partial_derivative(v, j));
  return out;
}

SpectralOperator a_n(std::span<const SpectralField> us, const SpectralOperator& a, int bound) {
  const int n = static_cast<int>(us.size());
  if (n > bound) {
    throw BoundExceeded("a_n with n = " + std::to_string(n) + " exceeds the bound " + std::to_string(bound));
  }
  if (n == 0) return a;
  check_same_grid(us, a.grid());
  const SpectralField& last = us.back();
  const auto head = us.first(n - 1);
  const SpectralOperator prev = a_n(head, a, bound);
  SpectralOperator out = commutator(nabla(last, a.components()), prev);
  std::vector<SpectralField> sub(head.begin(), head.end());
  for (std::size_t k = 0; k < sub.size(); ++k) {
    const SpectralField keep = sub[k];
    sub[k] = covariant_derivative(last, keep);
    out = out - a_n(sub, a, bound);
    sub[k] = keep;
  }
  return out.with_order(a.order());
}

void TermDescriptor::canonicalize() {
  std::sort(multiplied.begin(), multiplied.end());
  std::sort(commuted.begin(), commuted.end());
  std::sort(differentiated.begin(), differentiated.end());
}

bool TermDescriptor::same_shape(const TermDescriptor& o) const {
  return type == o.type && multiplied == o.multiplied && commuted == o.commuted &&
         differentiated == o.differentiated && ad_alpha == o.ad_alpha && right_alpha == o.right_alpha &&
         trailing_axis == o.trailing_axis;
}

std::string TermDescriptor::describe() const {
  std::ostringstream os;
  os << (coefficient >= 0 ? "+" : "-") << std::abs(coefficient) << ' ';
  if (type == Type::I) {
    os << "I M" << slots_text(multiplied) << " ad" << multi_index_text(ad_alpha) << " A";
  } else {
    os << "II M" << slots_text(multiplied) << " S" << slots_text(commuted) << "{ad"
       << multi_index_text(ad_alpha) << " A D" << multi_index_text(right_alpha) << "} M"
       << slots_text(differentiated) << " D" << trailing_axis;
  }
  os << " order " << base_order;
  return os.str();
}

SpectralOperator TermDescriptor::evaluate(std::span<const SpectralField> us, const SpectralOperator& a) const {
  const TorusGrid& g = a.grid();
  check_same_grid(us, g);
  const int c = a.components();
  const auto m1 = slot_fields(multiplied, us);
  const SpectralOperator ad = ad_D_alpha(a, ad_alpha);
  if (type == Type::I) return (product_op(g, m1, c) * ad).scaled(coefficient);
  const auto s = slot_fields(commuted, us);
  const auto m3 = slot_fields(differentiated, us);
  const SpectralOperator b = ad * derivative_power(g, right_alpha, c);
  return (product_op(g, m1, c) * nested_commutator(s, b) * product_op(g, m3, c) *
          SpectralOperator::derivative(g, trailing_axis, c))
      .scaled(coefficient);
}

std::vector<TermDescriptor> split_terms(int n, double r, int dim) {
  if (n < 1 || n > 3) throw InvalidParameter("split_terms supports n in {1,2,3}");
  if (dim < 1 || dim > 2) throw InvalidParameter("dimension must be 1 or 2");
  TermDescriptor seed;
  seed.base_order = r;
  std::vector<TermDescriptor> terms{seed};
  for (int m = 0; m < n; ++m) {
    std::vector<TermDescriptor> next;
    for (const auto& t : terms) {
      for (int j = 0; j < dim; ++j) {
        for (auto& d : rec_term(t, m, j)) merge_into(next, std::move(d));
      }
    }
    std::erase_if(next, [](const TermDescriptor& t) { return t.coefficient == 0.0; });
    terms = std::move(next);
  }
  return terms;
}

SpectralOperator evaluate_terms(std::span<const TermDescriptor> terms, std::span<const SpectralField> us,
                                const SpectralOperator& a) {
  SpectralOperator out = SpectralOperator::zero(a.grid(), a.components());
  for (const auto& t : terms) out = out + t.evaluate(us, a);
  return out.with_order(a.order());
}

SymbolHat::SymbolHat(const SymbolSpec& spec, const TorusGrid& grid)
    : spec_(spec), grid_(grid), components_(spec.components) {
  if (spec.dim != grid.dim()) throw GridMismatch("symbol dimension does not match grid");
  if (spec.kind == SymbolKind::gridded) {
    if (!spec.table_grid || *spec.table_grid != grid) {
      throw GridMismatch("gridded symbol is tabulated on a different grid");
    }
    const std::size_t n = grid.size();
    const std::size_t nb = grid.band_size();
    const int c = components_;
    gridded_hat_.assign(nb * n, Matrix::Zero(c, c));
    std::vector<Complex> column(n), hat;
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t s = 0; s < nb; ++s) {
      const std::size_t k = grid.band_indices()[s];
      for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) {
          for (std::size_t x = 0; x < n; ++x) column[x] = spec.table[x * n + k](i, j);
          detail::fft(column, hat, grid.dim(), grid.n(), detail::Direction::forward);
          for (std::size_t l = 0; l < n; ++l) gridded_hat_[s * n + l](i, j) = hat[l] * scale;
        }
      }
    }
    for (std::size_t l : grid.band_indices()) support_.push_back(grid.frequency(l));
    return;
  }
  support_.push_back({0, 0});
  for (const auto& t : spec.terms) {
    if (!t.x_factor) continue;
    // Coefficients at round-off level are left out of the support.
    const TorusGrid& xg = t.x_factor->grid();
    const double floor = 1e-14 * t.x_factor->max_abs_coefficient();
    for (std::size_t l : xg.band_indices()) {
      const Frequency lam = xg.frequency(l);
      if (std::abs(t.x_factor->at(0, l)) <= floor) continue;
      if (std::find(support_.begin(), support_.end(), lam) == support_.end()) support_.push_back(lam);
    }
  }
  std::sort(support_.begin(), support_.end());
}

Matrix SymbolHat::operator()(const Frequency& lambda, const Frequency& k) const {
  const int c = components_;
  if (spec_.kind == SymbolKind::gridded) {
    if (!grid_.in_band(k) || !grid_.in_band(lambda)) return Matrix::Zero(c, c);
    const auto s = static_cast<std::size_t>(grid_.band_position(grid_.index_of(k)));
    return gridded_hat_[s * grid_.size() + grid_.index_of(lambda)];
  }
  Matrix out = Matrix::Zero(c, c);
  for (const auto& t : spec_.terms) {
    Complex g = (lambda == Frequency{0, 0}) ? Complex(1.0) : Complex{};
    if (t.x_factor) g = t.x_factor->coefficient(0, lambda);
    if (g == Complex{}) continue;
    out += g * t.profile(k) * t.coupling;
  }
  return out;
}

Matrix p_hat_n(const SymbolHatFn& phat, const Frequency& lambda, std::span<const Frequency> xis) {
  if (xis.empty() || xis.size() > 5) throw InvalidParameter("p_hat_n needs 1 <= n + 1 <= 5 frequencies");
  const std::size_t n = xis.size() - 1;
  Matrix out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    Frequency k = xis[0];
    int parity = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask & (std::size_t{1} << j)) {
        k = add(k, xis[j + 1]);
        ++parity;
      }
    }
    Matrix v = phat(lambda, k);
    if (parity % 2) v = -v;
    if (out.size() == 0) {
      out = std::move(v);
    } else {
      out += v;
    }
  }
  return out;
}

double symbol_formula_check(const SymbolSpec& spec, const TorusGrid& grid,
                            std::span<const Frequency> mode_frequencies, const Frequency& w_frequency,
                            int w_component, std::span<const double> amplitudes) {
  const std::size_t n = mode_frequencies.size();
  if (n > 3) throw InvalidParameter("symbol_formula_check supports n <= 3");
  if (!amplitudes.empty() && amplitudes.size() != n) throw ShapeMismatch("one amplitude per mode expected");
  const int c = spec.components;
  if (w_component < 0 || w_component >= c) throw InvalidParameter("probe component out of range");
  if (!grid.in_band(w_frequency)) throw InvalidParameter("probe frequency outside the band");

  std::vector<SpectralField> fs;
  // Each factor as a list of (frequency, coefficient).
  std::vector<std::vector<std::pair<Frequency, Complex>>> modes(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Frequency k = mode_frequencies[i];
    if (!grid.in_band(k)) throw InvalidParameter("mode frequency outside the band");
    const double amp = amplitudes.empty() ? 1.0 : amplitudes[i];
    SpectralField f(grid, 1);
    f.set_mode(0, k, amp);
    fs.push_back(f);
    for (std::size_t l : grid.band_indices()) {
      if (f.at(0, l) != Complex{}) modes[i].emplace_back(grid.frequency(l), f.at(0, l));
    }
  }

  const SpectralOperator p = realize(spec, grid);
  const SpectralOperator s = nested_commutator(fs, p);
  const std::size_t nb = grid.band_size();
  Vector e = Vector::Zero(s.dimension());
  e(w_component * nb + grid.band_position(grid.index_of(w_frequency))) = 1.0;
  const Vector actual = s.apply(e);

  const SymbolHat hat(spec, grid);
  const SymbolHatFn fn = [&hat](const Frequency& l, const Frequency& k) { return hat(l, k); };
  Vector predicted = Vector::Zero(s.dimension());
  std::vector<std::size_t> choice(n, 0);
  while (true) {
    bool empty = false;
    for (std::size_t i = 0; i < n; ++i) empty = empty || modes[i].empty();
    if (empty) break;
    std::vector<Frequency> xis{w_frequency};
    Complex weight = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      xis.push_back(modes[i][choice[i]].first);
      weight *= modes[i][choice[i]].second;
    }
    for (const Frequency& lam : hat.support()) {
      const Matrix v = p_hat_n(fn, lam, xis);
      if (v.cwiseAbs().maxCoeff() == 0.0) continue;
      for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        Frequency part = add(lam, w_frequency);
        Frequency in = w_frequency;
        for (std::size_t j = 0; j < n; ++j) {
          if (mask & (std::size_t{1} << j)) {
            part = add(part, xis[j + 1]);
            in = add(in, xis[j + 1]);
          }
        }
        if (!grid.in_band(part) || !grid.in_band(in)) {
          throw InvalidParameter("frequencies leave the band; the truncated operator cannot match");
        }
      }
      Frequency out = add(lam, w_frequency);
      for (std::size_t j = 1; j <= n; ++j) out = add(out, xis[j]);
      const std::size_t pos = static_cast<std::size_t>(grid.band_position(grid.index_of(out)));
      for (int i = 0; i < c; ++i) predicted(i * nb + pos) += weight * v(i, w_component);
    }
    std::size_t i = 0;
    while (i < n && ++choice[i] == modes[i].size()) choice[i++] = 0;
    if (i == n) break;
  }
  const double scale = std::max(1.0, predicted.cwiseAbs().maxCoeff());
  return (actual - predicted).cwiseAbs().maxCoeff() / scale;
}

std::string ProbeReport::to_json() const {
  std::ostringstream os;
  os << "{\"n\": " << n << ", \"q\": " << format_double(q) << ", \"r\": " << format_double(r)
     << ", \"N\": " << grid_n << ", \"samples\": " << samples << ", \"skips\": " << skips
     << ", \"max_ratio\": " << format_double(max_ratio) << ", \"median_ratio\": " << format_double(median_ratio)
     << ", \"seed\": " << seed << "}";
  return os.str();
}

namespace {

// Largest |ξ - k|_∞ over entries of p above roundoff, i.e. how far p moves frequencies.
int x_spread(const SpectralOperator& p) {
  if (p.is_multiplier()) return 0;
  const TorusGrid& g = p.grid();
  const Matrix m = p.to_dense();
  const auto& band = g.band_indices();
  const auto nb = static_cast<Eigen::Index>(band.size());
  const double floor = 1e-13 * m.cwiseAbs().maxCoeff();
  int out = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Frequency xi = g.frequency(band[i % nb]);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::abs(m(i, j)) <= floor) continue;
      const Frequency k = g.frequency(band[j % nb]);
      out = std::max(out, max_norm({xi[0] - k[0], xi[1] - k[1]}, g.dim()));
    }
  }
  return out;
}

}  // namespace

ProbeReport boundedness_probe(const SpectralOperator& p, int n, double q, double r, int samples,
                              std::uint64_t seed, double field_amplitude) {
  const TorusGrid& g = p.grid();
  const double d = g.dim();
  if (!(q > 1.0 + d / 2.0)) throw InvalidParameter("probe needs q > 1 + d/2");
  if (!(r >= 1.0 && r <= q)) throw InvalidParameter("probe needs 1 <= r <= q");
  if (n < 1) throw InvalidParameter("probe needs n >= 1");
  if (samples < 1) throw InvalidParameter("probe needs at least one sample");

  ProbeReport rep;
  rep.n = n;
  rep.q = q;
  rep.r = r;
  rep.grid_n = g.n();
  rep.samples = samples;
  rep.seed = seed;
  // Degrees chosen so no product in the expansion leaves the band: then the
  // truncated operator acts on these inputs exactly as the continuum one.
  const int kmax = g.max_frequency();
  const int spread = x_spread(p);
  const int f_mode = std::max(1, kmax / (2 * n));
  const int w_mode = kmax - n * f_mode - spread;
  if (w_mode < 1) throw InvalidParameter("grid too coarse for the probe at this arity");
  const RandomFieldOptions f_opts{.decay = q + d / 2.0 + 0.51, .max_mode = f_mode};
  const RandomFieldOptions w_opts{.decay = (q - 1.0) + d / 2.0 + 0.51, .max_mode = w_mode};
  std::vector<double> ratios;
  for (int s = 0; s < samples; ++s) {
    const auto base = static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(n + 1);
    std::vector<SpectralField> fs;
    double denom = 1.0;
    for (int i = 0; i < n; ++i) {
      fs.push_back(field_amplitude * random_field(g, 1, seed, base + i, f_opts));
      denom *= sobolev_norm(fs.back(), q);
    }
    const SpectralField w = random_field(g, p.components(), seed, base + n, w_opts);
    denom *= sobolev_norm(w, q - 1.0);
    if (denom == 0.0) {
      ++rep.skips;
      continue;
    }
    ratios.push_back(sobolev_norm(nested_commutator_apply(fs, p, w), q - r) / denom);
  }
  if (!ratios.empty()) {
    std::sort(ratios.begin(), ratios.end());
    rep.max_ratio = ratios.back();
    const std::size_t m = ratios.size();
    rep.median_ratio = m % 2 ? ratios[m / 2] : 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]);
  }
  return rep;
}

EstimateStructureReport estimate_structure(const SymbolHat& phat, const TorusGrid& grid, int n, double r,
                                           int samples, std::uint64_t seed) {
  if (n < 1 || n > 4) throw InvalidParameter("estimate_structure supports 1 <= n <= 4");
  const int d = grid.dim();
  const int kmax = grid.max_frequency();
  const CounterRng rng(seed, 0x5e57);
  const SymbolHatFn fn = [&phat](const Frequency& l, const Frequency& k) { return phat(l, k); };
  EstimateStructureReport rep;
  rep.n = n;
  rep.r = r;
  rep.samples = samples;
  const int shells = static_cast<int>(std::floor(std::log2(std::max(1, kmax)))) + 1;
  rep.shell_constants.assign(static_cast<std::size_t>(shells), 0.0);
  const double log_top = std::log2(static_cast<double>(std::max(1, kmax)));
  std::uint64_t ctr = 0;
  for (int s = 0; s < samples; ++s) {
    std::vector<Frequency> xis;
    int biggest = 0;
    for (int j = 0; j <= n; ++j) {
      const double radius = std::exp2(rng.uniform(ctr++) * log_top);
      Frequency k{0, 0};
      for (int a = 0; a < d; ++a) {
        k[a] = static_cast<int>(std::lround((2.0 * rng.uniform(ctr++) - 1.0) * radius));
      }
      biggest = std::max(biggest, max_norm(k, d));
      xis.push_back(k);
    }
    const auto& sup = phat.support();
    const Frequency lam = sup[static_cast<std::size_t>(rng.uniform(ctr++) * sup.size()) % sup.size()];
    const double value = Eigen::JacobiSVD<Matrix>(p_hat_n(fn, lam, xis)).singularValues()(0);
    double weight = 1.0;
    for (int j = 1; j <= n; ++j) weight *= TorusGrid::japanese(xis[j]);
    double sum = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      Frequency k = xis[0];
      for (int j = 0; j < n; ++j) {
        if (mask & (std::size_t{1} << j)) k = add(k, xis[j + 1]);
      }
      sum += std::pow(TorusGrid::japanese(k), r - 1.0);
    }
    const double constant = value / (weight * sum);
    const int shell = std::min(shells - 1, static_cast<int>(std::floor(std::log2(std::max(1, biggest)))));
    rep.shell_constants[shell] = std::max(rep.shell_constants[shell], constant);
    rep.max_constant = std::max(rep.max_constant, constant);
  }
  return rep;
}

SpectralOperator localize(const SpectralOperator& p, int radius) {
  const TorusGrid& g = p.grid();
  const int c = p.components();
  const auto& band = g.band_indices();
  const std::size_t nb = band.size();
  std::vector<bool> keep(nb);
  for (std::size_t s = 0; s < nb; ++s) keep[s] = max_norm(g.frequency(band[s]), g.dim()) <= radius;
  if (p.is_multiplier()) {
    std::vector<Matrix> blocks(nb);
    for (std::size_t s = 0; s < nb; ++s) blocks[s] = keep[s] ? p.block(s) : Matrix::Zero(c, c);
    return SpectralOperator::multiplier(g, c, std::move(blocks), p.order());
  }
  Matrix m = p.to_dense();
  for (int ci = 0; ci < c; ++ci) {
    for (std::size_t s = 0; s < nb; ++s) {
      if (keep[s]) continue;
      m.row(ci * nb + s).setZero();
      m.col(ci * nb + s).setZero();
    }
  }
  return SpectralOperator::dense(g, c, std::move(m), p.order());
}

SpectralOperator random_local_operator(const TorusGrid& grid, int components, std::uint64_t seed,
                                       std::uint64_t stream, int radius) {
  const auto& band = grid.band_indices();
  const std::size_t nb = band.size();
  const std::size_t dim = components * nb;
  const CounterRng rng(seed, stream);
  std::vector<std::size_t> mirror(nb);
  std::vector<bool> inside(nb);
  for (std::size_t s = 0; s < nb; ++s) {
    mirror[s] = static_cast<std::size_t>(grid.band_position(grid.mirror(band[s])));
    inside[s] = max_norm(grid.frequency(band[s]), grid.dim()) <= radius;
  }
  Matrix raw = Matrix::Zero(dim, dim);
  for (std::size_t a = 0; a < dim; ++a) {
    if (!inside[a % nb]) continue;
    for (std::size_t b = 0; b < dim; ++b) {
      if (!inside[b % nb]) continue;
      raw(a, b) = Complex(rng.normal(a, b, 0), rng.normal(a, b, 1));
    }
  }
  Matrix m(dim, dim);
  for (std::size_t a = 0; a < dim; ++a) {
    const std::size_t am = (a / nb) * nb + mirror[a % nb];
    for (std::size_t b = 0; b < dim; ++b) {
      const std::size_t bm = (b / nb) * nb + mirror[b % nb];
      m(a, b) = 0.5 * (raw(a, b) + std::conj(raw(am, bm)));
    }
  }
  return SpectralOperator::dense(grid, components, std::move(m), 0.0);
}

double window_gap(const SpectralOperator& a, const SpectralOperator& b, int window, bool spectral) {
  if (a.grid() != b.grid()) throw GridMismatch();
  if (a.components() != b.components()) throw ShapeMismatch("operator component counts differ");
  const auto idx = window_indices(a.grid(), a.components(), window);
  const Matrix ma = a.to_dense()(idx, idx);
  const Matrix mb = b.to_dense()(idx, idx);
  const auto norm = [spectral](const Matrix& m) {
    if (m.size() == 0) return 0.0;
    if (!spectral) return vector_norm(m);
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
  };
  const double scale = std::max(norm(ma), norm(mb));
  const double diff = norm(ma - mb);
  return scale == 0.0 ? diff : diff / scale;
}

}  // namespace epdiff
