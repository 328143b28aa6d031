#include "epdiff/field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "epdiff/errors.hpp"
#include "fft.hpp"

namespace epdiff {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::size_t grid_size(int dim, int m) {
  return dim == 1 ? static_cast<std::size_t>(m) : static_cast<std::size_t>(m) * m;
}

std::size_t index_on(int dim, int m, const Frequency& k) {
  const auto wrap = [m](int v) { return static_cast<std::size_t>(v >= 0 ? v : v + m); };
  return dim == 1 ? wrap(k[0]) : wrap(k[0]) * m + wrap(k[1]);
}

}  // namespace

SpectralField::SpectralField(TorusGrid grid, int components)
    : grid_(std::move(grid)), components_(components) {
  if (components < 1) throw InvalidParameter("field needs at least one component");
  coeffs_.assign(static_cast<std::size_t>(components) * grid_.size(), Complex{});
}

SpectralField SpectralField::from_samples(const TorusGrid& grid, int components,
                                          std::span<const double> samples) {
  if (samples.size() != static_cast<std::size_t>(components) * grid.size()) {
    throw ShapeMismatch("sample count does not match grid and component count");
  }
  SpectralField f(grid, components);
  const double scale = 1.0 / static_cast<double>(grid.size());
  std::vector<Complex> buffer(grid.size()), out;
  for (int c = 0; c < components; ++c) {
    for (std::size_t i = 0; i < grid.size(); ++i) buffer[i] = samples[c * grid.size() + i];
    detail::fft(buffer, out, grid.dim(), grid.n(), detail::Direction::forward);
    auto dst = f.component_span(c);
    for (std::size_t i = 0; i < grid.size(); ++i) dst[i] = out[i] * scale;
  }
  f.enforce_reality();
  return f;
}

SpectralField SpectralField::constant(const TorusGrid& grid, std::span<const double> values) {
  SpectralField f(grid, static_cast<int>(values.size()));
  for (std::size_t c = 0; c < values.size(); ++c) f.at(static_cast<int>(c), 0) = values[c];
  return f;
}

SpectralField SpectralField::scalar_constant(const TorusGrid& grid, double value) {
  const double v[] = {value};
  return constant(grid, v);
}

SpectralField SpectralField::stack(std::span<const SpectralField> scalars) {
  if (scalars.empty()) throw InvalidParameter("cannot stack an empty list of fields");
  SpectralField out(scalars.front().grid(), static_cast<int>(scalars.size()));
  for (std::size_t c = 0; c < scalars.size(); ++c) {
    if (scalars[c].grid() != out.grid()) throw GridMismatch();
    if (scalars[c].components() != 1) throw ShapeMismatch("stack expects scalar fields");
    std::ranges::copy(scalars[c].component_span(0), out.component_span(static_cast<int>(c)).begin());
  }
  return out;
}

Complex SpectralField::coefficient(int component, const Frequency& k) const {
  if (!grid_.in_band(k)) return {};
  return at(component, grid_.index_of(k));
}

void SpectralField::set_mode(int component, const Frequency& k, Complex value) {
  if (!grid_.in_band(k)) throw InvalidParameter("frequency outside the retained band");
  const std::size_t i = grid_.index_of(k);
  const std::size_t j = grid_.mirror(i);
  if (i == j) {
    at(component, i) = value.real();
  } else {
    at(component, i) = value;
    at(component, j) = std::conj(value);
  }
}

SpectralField SpectralField::component(int c) const {
  if (c < 0 || c >= components_) throw InvalidParameter("component index out of range");
  SpectralField out(grid_, 1);
  std::ranges::copy(component_span(c), out.component_span(0).begin());
  return out;
}

std::vector<double> SpectralField::samples() const {
  std::vector<double> out(static_cast<std::size_t>(components_) * grid_.size());
  std::vector<Complex> buffer(grid_.size()), phys;
  for (int c = 0; c < components_; ++c) {
    auto src = component_span(c);
    std::ranges::copy(src, buffer.begin());
    detail::fft(buffer, phys, grid_.dim(), grid_.n(), detail::Direction::backward);
    for (std::size_t i = 0; i < grid_.size(); ++i) out[c * grid_.size() + i] = phys[i].real();
  }
  return out;
}

void SpectralField::enforce_reality() {
  for (int c = 0; c < components_; ++c) {
    auto data = component_span(c);
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      if (grid_.is_nyquist(i)) {
        data[i] = 0.0;
        continue;
      }
      const std::size_t j = grid_.mirror(i);
      if (j < i) continue;
      if (i == j) {
        data[i] = data[i].real();
      } else {
        const Complex avg = 0.5 * (data[i] + std::conj(data[j]));
        data[i] = avg;
        data[j] = std::conj(avg);
      }
    }
  }
}

double SpectralField::reality_defect() const {
  double defect = 0.0;
  for (int c = 0; c < components_; ++c) {
    auto data = component_span(c);
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      if (grid_.is_nyquist(i)) {
        defect = std::max(defect, std::abs(data[i]));
      } else {
        defect = std::max(defect, std::abs(data[grid_.mirror(i)] - std::conj(data[i])));
      }
    }
  }
  return defect;
}

double SpectralField::max_abs_coefficient() const {
  double m = 0.0;
  for (const auto& z : coeffs_) m = std::max(m, std::abs(z));
  return m;
}

void SpectralField::check_compatible(const SpectralField& other) const {
  if (grid_ != other.grid_) throw GridMismatch();
  if (components_ != other.components_) throw ShapeMismatch("component counts differ");
}

SpectralField& SpectralField::operator+=(const SpectralField& other) {
  check_compatible(other);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& other) {
  check_compatible(other);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
  return *this;
}

SpectralField& SpectralField::operator*=(double s) {
  for (auto& z : coeffs_) z *= s;
  return *this;
}

double sobolev_norm(const SpectralField& f, double q) {
  if (!(q >= 0.0)) throw InvalidParameter("Sobolev index must be >= 0");
  const TorusGrid& g = f.grid();
  double sum = 0.0;
  for (std::size_t i : g.band_indices()) {
    const double w = std::pow(TorusGrid::japanese(g.frequency(i)), 2.0 * q);
    for (int c = 0; c < f.components(); ++c) sum += w * std::norm(f.at(c, i));
  }
  return std::sqrt(sum);
}

double l2_inner(const SpectralField& f, const SpectralField& g) {
  if (f.grid() != g.grid()) throw GridMismatch();
  if (f.components() != g.components()) throw ShapeMismatch("component counts differ");
  double sum = 0.0;
  for (int c = 0; c < f.components(); ++c) {
    for (std::size_t i : f.grid().band_indices()) sum += (f.at(c, i) * std::conj(g.at(c, i))).real();
  }
  return sum;
}

std::vector<double> padded_samples(const SpectralField& f) {
  const TorusGrid& g = f.grid();
  const int m = 2 * g.n();
  const std::size_t total = grid_size(g.dim(), m);
  std::vector<double> out(static_cast<std::size_t>(f.components()) * total);
  std::vector<Complex> buffer(total), phys;
  for (int c = 0; c < f.components(); ++c) {
    std::fill(buffer.begin(), buffer.end(), Complex{});
    for (std::size_t i : g.band_indices()) buffer[index_on(g.dim(), m, g.frequency(i))] = f.at(c, i);
    detail::fft(buffer, phys, g.dim(), m, detail::Direction::backward);
    for (std::size_t i = 0; i < total; ++i) out[c * total + i] = phys[i].real();
  }
  return out;
}

SpectralField from_padded_samples(const TorusGrid& grid, int components,
                                  std::span<const double> samples) {
  const int m = 2 * grid.n();
  const std::size_t total = grid_size(grid.dim(), m);
  if (samples.size() != static_cast<std::size_t>(components) * total) {
    throw ShapeMismatch("padded sample count does not match grid");
  }
  SpectralField f(grid, components);
  const double scale = 1.0 / static_cast<double>(total);
  std::vector<Complex> buffer(total), spec;
  for (int c = 0; c < components; ++c) {
    for (std::size_t i = 0; i < total; ++i) buffer[i] = samples[c * total + i];
    detail::fft(buffer, spec, grid.dim(), m, detail::Direction::forward);
    for (std::size_t i : grid.band_indices()) {
      f.at(c, i) = spec[index_on(grid.dim(), m, grid.frequency(i))] * scale;
    }
  }
  f.enforce_reality();
  return f;
}

SpectralField pointwise_multiply(const SpectralField& f, const SpectralField& g) {
  if (f.grid() != g.grid()) throw GridMismatch();
  if (f.components() != 1 || g.components() != 1) {
    throw ShapeMismatch("pointwise_multiply expects scalar fields");
  }
  auto a = padded_samples(f);
  const auto b = padded_samples(g);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
  return from_padded_samples(f.grid(), 1, a);
}

SpectralField scale_by(const SpectralField& scalar, const SpectralField& v) {
  if (scalar.grid() != v.grid()) throw GridMismatch();
  if (scalar.components() != 1) throw ShapeMismatch("scale_by expects a scalar multiplier");
  const auto s = padded_samples(scalar);
  auto b = padded_samples(v);
  const std::size_t total = s.size();
  for (int c = 0; c < v.components(); ++c) {
    for (std::size_t i = 0; i < total; ++i) b[c * total + i] *= s[i];
  }
  return from_padded_samples(v.grid(), v.components(), b);
}

SpectralField partial_derivative(const SpectralField& f, int axis) {
  const TorusGrid& g = f.grid();
  if (axis < 0 || axis >= g.dim()) {
    throw InvalidParameter("derivative axis " + std::to_string(axis) + " out of range");
  }
  SpectralField out(g, f.components());
  for (std::size_t i : g.band_indices()) {
    const Complex factor(0.0, kTwoPi * g.frequency(i)[axis]);
    for (int c = 0; c < f.components(); ++c) out.at(c, i) = factor * f.at(c, i);
  }
  return out;
}

PointEvaluator::PointEvaluator(const TorusGrid& grid, const Point& x) : grid_(grid) {
  const int n = grid.n();
  const auto table = [n](double coordinate) {
    std::vector<Complex> e(n);
    const double t = wrap_unit(coordinate);
    const Complex w = std::polar(1.0, kTwoPi * t);
    Complex p = 1.0;
    e[0] = 1.0;
    for (int k = 1; k < n / 2; ++k) {
      p *= w;
      e[k] = p;
      e[n - k] = std::conj(p);
    }
    e[n / 2] = 0.0;
    return e;
  };
  e0_ = table(x[0]);
  if (grid.dim() == 2) e1_ = table(x[1]);
}

double PointEvaluator::value(const SpectralField& f, int component) const {
  const auto data = f.component_span(component);
  const int n = grid_.n();
  if (grid_.dim() == 1) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += (data[i] * e0_[i]).real();
    return sum;
  }
  Complex total{};
  for (int i0 = 0; i0 < n; ++i0) {
    if (i0 == n / 2) continue;
    Complex row{};
    const Complex* r = data.data() + static_cast<std::size_t>(i0) * n;
    for (int i1 = 0; i1 < n; ++i1) row += r[i1] * e1_[i1];
    total += e0_[i0] * row;
  }
  return total.real();
}

std::vector<double> evaluate(const SpectralField& f, std::span<const Point> points) {
  const int c = f.components();
  std::vector<double> out(points.size() * c);
  for (std::size_t p = 0; p < points.size(); ++p) {
    PointEvaluator ev(f.grid(), points[p]);
    for (int k = 0; k < c; ++k) out[p * c + k] = ev.value(f, k);
  }
  return out;
}

}  // namespace epdiff
