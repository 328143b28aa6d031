#pragma once

#include <span>
#include <string>
#include <vector>

#include "epdiff/diffeo.hpp"
#include "epdiff/operator.hpp"

namespace epdiff {

/// A_φ = R_φ ∘ A ∘ R_{φ⁻¹}, applied as an action. The inverse of φ is
/// computed once, at construction.
class TwistedOperator {
 public:
  TwistedOperator(SpectralOperator base, Diffeo phi, double inversion_tol = 1e-12);

  const SpectralOperator& base() const { return base_; }
  const Diffeo& phi() const { return phi_; }
  const Diffeo& phi_inv() const { return phi_inv_; }

  /// compose(A(compose(v, φ⁻¹)), φ)
  SpectralField apply(const SpectralField& v) const;

  /// Dense matrix of the action in the to_vector basis, one column per band
  /// mode and component. Diagnostics only: d = 1 and N <= 64.
  SpectralOperator assemble() const;

 private:
  SpectralOperator base_;
  Diffeo phi_;
  Diffeo phi_inv_;
};

TwistedOperator twist(const SpectralOperator& a, const Diffeo& phi);

/// φ ∘ ψ, whose displacement is f_ψ + f_φ∘ψ.
Diffeo compose_diffeo(const Diffeo& phi, const Diffeo& psi);

/// (A_{id+ε h} v − A_{id−ε h} v) / 2ε
SpectralField gateaux_fd(const SpectralOperator& a, const SpectralField& dphi, const SpectralField& v, double eps);

/// Mixed second central difference of ε ↦ A_{id+ε₁h₁+ε₂h₂} v with ε₁ = ε₂ = eps.
SpectralField second_gateaux_fd(const SpectralOperator& a, const SpectralField& h1, const SpectralField& h2,
                                const SpectralField& v, double eps);

/// [∇_h, A] v
SpectralField derivative_formula(const SpectralOperator& a, const SpectralField& dphi, const SpectralField& v);

/// A_2(h1, h2) v from the commutator recurrence.
SpectralField second_derivative_formula(const SpectralOperator& a, const SpectralField& h1,
                                        const SpectralField& h2, const SpectralField& v);

struct ConvergenceReport {
  std::vector<double> eps;
  /// L² distance between the difference quotient and the formula.
  std::vector<double> errors;
  double slope = 0.0;

  std::string to_json() const;
};

/// Runs the difference quotient over an eps ladder against the formula.
ConvergenceReport first_derivative_study(const SpectralOperator& a, const SpectralField& dphi,
                                         const SpectralField& v, std::span<const double> eps_ladder);
ConvergenceReport second_derivative_study(const SpectralOperator& a, const SpectralField& h1,
                                          const SpectralField& h2, const SpectralField& v,
                                          std::span<const double> eps_ladder);

/// Least-squares slope of log y against log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Largest singular value of ⟨D⟩^{q−r} M ⟨D⟩^{−q} by power iteration on the
/// normal operator.
double weighted_operator_norm(const SpectralOperator& m, double q, double r, int max_iterations = 500,
                              double tol = 1e-12);

}  // namespace epdiff
