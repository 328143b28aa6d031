#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "epdiff/operator.hpp"

namespace epdiff {

/// Dense multiplication by the dealiased product f_1⋯f_n.
SpectralOperator mult_op(std::span<const SpectralField> fs, int components = 1);

/// S_{n,P}(f_1,…,f_n) = [f_1,[f_2,…,[f_n,P]…]]; S_{0,P} = P.
SpectralOperator nested_commutator(std::span<const SpectralField> fs, const SpectralOperator& p);

/// S_{n,P}(f_1,…,f_n) w evaluated on a field without assembling any commutator.
SpectralField nested_commutator_apply(std::span<const SpectralField> fs, const SpectralOperator& p,
                                      const SpectralField& w);

/// Operator-valued map, linear in each of its `arity` scalar arguments.
struct MultilinearMap {
  int arity = 0;
  std::function<SpectralOperator(std::span<const SpectralField>)> eval;
};

/// Rec^j(P_n)(f_1,…,f_{n+1}) = [f_{n+1} D_j, P_n(f_1,…,f_n)] − Σ_k P_n(…, f_{n+1} ∂_j f_k, …).
SpectralOperator rec_j(const MultilinearMap& pn, std::span<const SpectralField> fs, int axis);

/// A_n(u_1,…,u_n) from A_0 = A and
/// A_n = [∇_{u_n}, A_{n−1}(u_1,…,u_{n−1})] − Σ_k A_{n−1}(…, ∇_{u_n} u_k, …).
SpectralOperator a_n(std::span<const SpectralField> us, const SpectralOperator& a, int bound = 3);

/// ∇_u v = Σ_j u^j ∂_j v, dealiased.
SpectralField covariant_derivative(const SpectralField& u, const SpectralField& v);

/// Scalar argument u_var^component, optionally differentiated along an axis.
struct FieldSlot {
  int var = 0;
  int component = 0;
  int derivative_axis = -1;

  auto operator<=>(const FieldSlot&) const = default;
};

/// One term of the Type I / Type II splitting of A_n.
///
///   Type I:  coefficient · M(multiplied) ∘ ad_D^{ad_alpha} A
///   Type II: coefficient · M(multiplied) ∘ S_{m2, B}(commuted) ∘ M(differentiated) ∘ D_{trailing_axis}
///            with B = (ad_D^{ad_alpha} A) ∘ D^{right_alpha}
struct TermDescriptor {
  enum class Type { I, II };

  Type type = Type::I;
  double coefficient = 1.0;
  std::vector<FieldSlot> multiplied;
  std::vector<FieldSlot> commuted;
  std::vector<FieldSlot> differentiated;
  Frequency ad_alpha{0, 0};
  Frequency right_alpha{0, 0};
  int trailing_axis = -1;
  /// r for Type I, r + m2 − 1 for Type II.
  double base_order = 0.0;

  /// Canonical form: slot lists sorted (M and S are totally symmetric).
  void canonicalize();
  bool same_shape(const TermDescriptor& other) const;
  std::string describe() const;

  SpectralOperator evaluate(std::span<const SpectralField> us, const SpectralOperator& a) const;
};

/// Replays the inductive splitting symbolically for A_n on T^d with an inertia
/// operator of order r. Terms with identical shape are merged.
std::vector<TermDescriptor> split_terms(int n, double r, int dim);

/// Σ_t t.evaluate(us, a)
SpectralOperator evaluate_terms(std::span<const TermDescriptor> terms, std::span<const SpectralField> us,
                                const SpectralOperator& a);

/// x-Fourier transform of a symbol: p̂(λ, k) as a c×c matrix, with the set of
/// λ where it can be nonzero.
class SymbolHat {
 public:
  SymbolHat(const SymbolSpec& spec, const TorusGrid& grid);
  Matrix operator()(const Frequency& lambda, const Frequency& k) const;
  const std::vector<Frequency>& support() const { return support_; }
  int components() const { return components_; }

 private:
  SymbolSpec spec_;
  TorusGrid grid_;
  int components_;
  std::vector<Frequency> support_;
  std::vector<Matrix> gridded_hat_;
};

using SymbolHatFn = std::function<Matrix(const Frequency&, const Frequency&)>;

/// Σ_{J ⊆ {1..n}} (−1)^{|J|} p̂(λ, ξ_0 + Σ_{j∈J} ξ_j), n = xis.size() − 1 <= 4.
Matrix p_hat_n(const SymbolHatFn& phat, const Frequency& lambda, std::span<const Frequency> xis);

/// Compares S_{n,P}(f_1,…,f_n) e_{k_w} with the prediction from p̂_n, where
/// f_i = e^{2πi k_i·x} + e^{−2πi k_i·x} and the probe is the basis vector at
/// frequency k_w in component `w_component`. Returns the largest coefficient
/// discrepancy relative to max(1, largest predicted coefficient). Optional
/// amplitudes scale each f_i. Throws InvalidParameter when a frequency in the
/// expansion leaves the band.
double symbol_formula_check(const SymbolSpec& spec, const TorusGrid& grid,
                            std::span<const Frequency> mode_frequencies, const Frequency& w_frequency,
                            int w_component = 0, std::span<const double> amplitudes = {});

struct ProbeReport {
  int n = 0;
  double q = 0.0;
  double r = 0.0;
  int grid_n = 0;
  int samples = 0;
  int skips = 0;
  double max_ratio = 0.0;
  double median_ratio = 0.0;
  std::uint64_t seed = 0;

  std::string to_json() const;
};

/// Samples ‖S_{n,P}(f)w‖_{H^{q−r}} / (Π‖f_i‖_{H^q} ‖w‖_{H^{q−1}}) over random
/// fields whose spectra decay like <k>^{−(s + d/2 + 0.51)} for the index s of
/// each norm. Coefficients depend only on (seed, sample, k), so the same
/// draws are refined as N grows. The f_i are scaled by field_amplitude;
/// samples with a vanishing denominator are counted as skips.
ProbeReport boundedness_probe(const SpectralOperator& p, int n, double q, double r, int samples,
                              std::uint64_t seed, double field_amplitude = 1.0);

struct EstimateStructureReport {
  int n = 0;
  double r = 0.0;
  /// Largest fitted constant among samples whose max |ξ_j|_∞ falls in each
  /// shell [2^s, 2^{s+1}).
  std::vector<double> shell_constants;
  double max_constant = 0.0;
  int samples = 0;
};

/// Fits C in |p̂_n| <= C Π<ξ_j> Σ_J <ξ_0 + Σ_J ξ_j>^{r−1} over random tuples
/// drawn from the band; reported, not asserted.
EstimateStructureReport estimate_structure(const SymbolHat& phat, const TorusGrid& grid, int n, double r,
                                           int samples, std::uint64_t seed);

/// Rows and columns with |k|_∞ <= radius kept, the rest zeroed.
SpectralOperator localize(const SpectralOperator& p, int radius);

/// Random dense operator mapping real fields to real fields, supported on
/// |ξ|_∞, |k|_∞ <= radius.
SpectralOperator random_local_operator(const TorusGrid& grid, int components, std::uint64_t seed,
                                       std::uint64_t stream, int radius);

/// Relative gap between two operators restricted to rows and columns with
/// |k|_∞ <= window. Uses the spectral norm when `spectral` is set, else Frobenius.
double window_gap(const SpectralOperator& a, const SpectralOperator& b, int window, bool spectral = false);

}  // namespace epdiff
