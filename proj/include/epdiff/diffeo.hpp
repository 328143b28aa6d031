#pragma once

#include <optional>
#include <vector>

#include "epdiff/field.hpp"

namespace epdiff {

/// Torus diffeomorphism φ = id + f with periodic displacement f (c = d).
/// Construction checks det(I + ∂f) > 0 at every collocation point.
class Diffeo {
 public:
  explicit Diffeo(SpectralField displacement);

  static Diffeo identity(const TorusGrid& grid);
  /// φ(x) = x + c.
  static Diffeo translation(const TorusGrid& grid, const Point& c);

  const TorusGrid& grid() const { return f_.grid(); }
  const SpectralField& displacement() const { return f_; }

  /// φ(x_j) at the collocation points, not wrapped.
  std::vector<Point> warped_points() const;
  /// Smallest det(I + ∂f) over the collocation points.
  double min_jacobian() const { return min_det_; }

 private:
  SpectralField f_;
  double min_det_ = 1.0;
};

/// Band-limited re-projection of v∘φ.
SpectralField compose(const SpectralField& v, const Diffeo& phi);

/// Fraction of the L² energy of v∘φ that lies outside the band, measured on
/// the 2N grid. Zero when composition keeps v band-limited.
double composition_tail(const SpectralField& v, const Diffeo& phi);

struct InversionOptions {
  double tol = 1e-12;
  int max_iterations = 100;
  /// Warm start; its displacement samples seed the per-point iteration.
  const Diffeo* initial_guess = nullptr;
};

/// ψ ≈ φ⁻¹ with max_j |φ(ψ(x_j)) − x_j| ≤ tol (torus distance).
Diffeo invert_diffeo(const Diffeo& phi, const InversionOptions& options);
Diffeo invert_diffeo(const Diffeo& phi, double tol);

/// max_j |φ(ψ(x_j)) − x_j| with distances taken modulo 1.
double inversion_residual(const Diffeo& phi, const Diffeo& psi);

/// det(I + ∂f) as a dealiased scalar field.
SpectralField jacobian_det(const Diffeo& phi);

}  // namespace epdiff
