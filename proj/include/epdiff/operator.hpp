#pragma once

#include <memory>

#include "epdiff/field.hpp"
#include "epdiff/symbol.hpp"

namespace epdiff {

/// Largest dense dimension c·|band| accepted by realize and densification.
inline constexpr std::size_t kDenseCap = 4096;

/// Band coefficients of f stacked component-major: entry c·|band| + p holds
/// the coefficient of component c at band position p.
Vector to_vector(const SpectralField& f);
SpectralField from_vector(const TorusGrid& grid, int components, const Vector& v);

/// Linear operator on the truncated spectral space of c-component fields.
/// Either a multiplier (one c×c block per band frequency) or a dense matrix
/// in the to_vector basis. Immutable; copies share storage.
class SpectralOperator {
 public:
  enum class Kind { multiplier, dense };

  static SpectralOperator identity(const TorusGrid& grid, int components = 1);
  static SpectralOperator zero(const TorusGrid& grid, int components = 1);
  /// blocks[p] is the c×c block at band position p.
  static SpectralOperator multiplier(const TorusGrid& grid, int components, std::vector<Matrix> blocks,
                                     double order);
  static SpectralOperator dense(const TorusGrid& grid, int components, Matrix m, double order);
  /// D_j = ∂/∂x^j, i.e. multiplication by 2πi k_j.
  static SpectralOperator derivative(const TorusGrid& grid, int axis, int components = 1);
  /// Dense multiplication by a scalar field: entry (ξ,k) is f̂(ξ−k) on each component.
  static SpectralOperator multiplication(const SpectralField& f, int components = 1);

  Kind kind() const { return kind_; }
  bool is_multiplier() const { return kind_ == Kind::multiplier; }
  const TorusGrid& grid() const { return grid_; }
  int components() const { return components_; }
  double order() const { return order_; }
  SpectralOperator with_order(double r) const;
  /// c·|band|
  std::size_t dimension() const { return components_ * grid_.band_size(); }

  const Matrix& block(std::size_t band_position) const { return (*blocks_)[band_position]; }
  /// Full matrix in the to_vector basis.
  Matrix to_dense() const;

  SpectralField apply(const SpectralField& f) const;
  Vector apply(const Vector& v) const;
  /// f with apply(f) = g; the dense factorization is computed once and shared.
  SpectralField solve(const SpectralField& g) const;

  /// max |M(−ξ,−k) − conj M(ξ,k)|
  double reality_defect() const;
  double frobenius_norm() const;

  SpectralOperator operator+(const SpectralOperator& b) const;
  SpectralOperator operator-(const SpectralOperator& b) const;
  /// Composition (this ∘ b). Order tags add.
  SpectralOperator operator*(const SpectralOperator& b) const;
  SpectralOperator scaled(Complex s) const;
  friend SpectralOperator operator*(double s, const SpectralOperator& a) { return a.scaled(s); }

 private:
  struct SolveCache;

  SpectralOperator(TorusGrid grid, int components, double order);
  void check_compatible(const SpectralOperator& b) const;

  TorusGrid grid_;
  int components_ = 1;
  double order_ = 0.0;
  Kind kind_ = Kind::multiplier;
  std::shared_ptr<const std::vector<Matrix>> blocks_;
  std::shared_ptr<const Matrix> dense_;
  std::shared_ptr<SolveCache> cache_;
};

/// Kohn–Nirenberg realization: (Au)^(ξ) = Σ_k â(ξ−k, k) û(k), with â the
/// band-limited x-Fourier coefficients of the symbol.
SpectralOperator realize(const SymbolSpec& spec, const TorusGrid& grid);

SpectralField apply(const SpectralOperator& a, const SpectralField& f);
SpectralField solve(const SpectralOperator& a, const SpectralField& g);

/// AB − BA, order tag r_A + r_B − 1.
SpectralOperator commutator(const SpectralOperator& a, const SpectralOperator& b);

/// ad_{D_0}^{α_0} ad_{D_1}^{α_1} A.
SpectralOperator ad_D_alpha(const SpectralOperator& a, const Frequency& alpha, int bound = 4);

/// ∇_u = Σ_j M_{u^j} D_j acting on fields with `components` components.
SpectralOperator nabla(const SpectralField& u, int components);

}  // namespace epdiff
