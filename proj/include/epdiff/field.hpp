#pragma once

#include <complex>
#include <span>
#include <vector>

#include "epdiff/grid.hpp"

namespace epdiff {

using Complex = std::complex<double>;

/// A real c-component field on T^d stored as truncated Fourier coefficients,
/// f(x) = Σ_k f̂(k) e^{2πi k·x}. Coefficients of real fields satisfy
/// f̂(-k) = conj f̂(k); Nyquist entries are always zero.
class SpectralField {
 public:
  SpectralField(TorusGrid grid, int components);

  /// Forward transform of real collocation samples laid out [component][point].
  static SpectralField from_samples(const TorusGrid& grid, int components,
                                    std::span<const double> samples);
  static SpectralField constant(const TorusGrid& grid, std::span<const double> values);
  static SpectralField scalar_constant(const TorusGrid& grid, double value);
  /// Stack scalar fields into one vector field.
  static SpectralField stack(std::span<const SpectralField> scalars);

  const TorusGrid& grid() const { return grid_; }
  int components() const { return components_; }

  Complex& at(int component, std::size_t index) { return coeffs_[offset(component) + index]; }
  const Complex& at(int component, std::size_t index) const {
    return coeffs_[offset(component) + index];
  }
  /// Coefficient at a band frequency; zero outside the band.
  Complex coefficient(int component, const Frequency& k) const;
  void set_mode(int component, const Frequency& k, Complex value);

  std::span<Complex> component_span(int component) {
    return {coeffs_.data() + offset(component), grid_.size()};
  }
  std::span<const Complex> component_span(int component) const {
    return {coeffs_.data() + offset(component), grid_.size()};
  }
  const std::vector<Complex>& coefficients() const { return coeffs_; }

  SpectralField component(int c) const;

  /// Real collocation samples laid out [component][point].
  std::vector<double> samples() const;

  /// Symmetrize to exact conjugate symmetry and zero the Nyquist entries.
  void enforce_reality();
  /// max_k |f̂(-k) - conj f̂(k)| plus the largest Nyquist magnitude.
  double reality_defect() const;

  double max_abs_coefficient() const;

  SpectralField& operator+=(const SpectralField& other);
  SpectralField& operator-=(const SpectralField& other);
  SpectralField& operator*=(double s);

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double s, SpectralField a) { return a *= s; }
  friend SpectralField operator*(SpectralField a, double s) { return a *= s; }
  SpectralField operator-() const { return -1.0 * *this; }

 private:
  std::size_t offset(int component) const {
    return static_cast<std::size_t>(component) * grid_.size();
  }
  void check_compatible(const SpectralField& other) const;

  TorusGrid grid_;
  int components_;
  std::vector<Complex> coeffs_;
};

/// ( Σ_c Σ_k <k>^{2q} |f̂_c(k)|^2 )^{1/2}
double sobolev_norm(const SpectralField& f, double q);

/// Σ_c Σ_k f̂_c(k) conj ĝ_c(k), which equals ∫ f·g dx for real fields.
double l2_inner(const SpectralField& f, const SpectralField& g);

/// Dealiased product of two scalar fields (2N zero padding, truncated back to the band).
SpectralField pointwise_multiply(const SpectralField& f, const SpectralField& g);

/// Dealiased product of a scalar field with each component of a vector field.
SpectralField scale_by(const SpectralField& scalar, const SpectralField& v);

/// ∂/∂x^axis, axis ∈ [0, d). Multiplies coefficients by 2πi k_axis.
SpectralField partial_derivative(const SpectralField& f, int axis);

/// Direct evaluation of the truncated series at arbitrary points. Output is
/// laid out [point][component]. Points are wrapped into [0,1)^d.
std::vector<double> evaluate(const SpectralField& f, std::span<const Point> points);

/// Samples on the zero-padded 2N-per-axis grid, laid out [component][point].
/// Pointwise products of such samples are exact for band-limited inputs.
std::vector<double> padded_samples(const SpectralField& f);
/// Inverse of padded_samples followed by truncation to the band.
SpectralField from_padded_samples(const TorusGrid& grid, int components,
                                  std::span<const double> samples);

/// Evaluates several fields at one point sharing the exponential tables.
class PointEvaluator {
 public:
  PointEvaluator(const TorusGrid& grid, const Point& x);
  /// Value of component c of f at the point.
  double value(const SpectralField& f, int component) const;

 private:
  TorusGrid grid_;
  std::vector<Complex> e0_;
  std::vector<Complex> e1_;
};

}  // namespace epdiff
