#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "epdiff/field.hpp"

namespace epdiff {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Scalar function of the frequency, taken from a fixed catalogue.
class FrequencyProfile {
 public:
  enum class Kind { bessel_power, poly, coordinate, table };

  /// (1 + |k|^2)^s
  static FrequencyProfile bessel_power(double s);
  /// Σ_i c_i |k|^{2i}
  static FrequencyProfile poly(std::vector<double> coeffs);
  /// k_axis (0-based axis). Fails the reality condition; kept for validation.
  static FrequencyProfile coordinate(int axis);
  /// Tabulated values; frequencies missing from the table evaluate to 0.
  static FrequencyProfile table(std::map<Frequency, Complex> values, std::string source = {});

  Kind kind() const { return kind_; }
  Complex operator()(const Frequency& k) const;
  /// Catalogue tag, e.g. `bessel_power(1)` or `poly(1,0,1)`.
  std::string tag() const;

 private:
  Kind kind_ = Kind::bessel_power;
  double exponent_ = 0.0;
  std::vector<double> coeffs_;
  int axis_ = 0;
  std::shared_ptr<const std::map<Frequency, Complex>> table_;
  std::string source_;
};

/// Parses a catalogue tag. `grid(file)` resolves `file` against base_dir.
FrequencyProfile parse_profile(const std::string& tag, const std::filesystem::path& base_dir = {});

/// One term g(x)·a(k)·B of a separable symbol: scalar x-factor g (absent
/// means 1), frequency profile a and constant c×c coupling matrix B.
struct SymbolTerm {
  std::optional<SpectralField> x_factor;
  FrequencyProfile profile = FrequencyProfile::bessel_power(0.0);
  Matrix coupling;
};

enum class SymbolKind { multiplier, separable, gridded };

/// Description of a symbol a(x,k) acting on c-component fields over T^d.
struct SymbolSpec {
  SymbolKind kind = SymbolKind::multiplier;
  double order = 0.0;
  int dim = 1;
  int components = 1;
  /// multiplier and separable: a(x,k) = Σ_m g_m(x) a_m(k) B_m.
  std::vector<SymbolTerm> terms;
  /// gridded: table[point * grid.size() + frequency storage index] is the
  /// c×c value a(x_point, k); Nyquist slots are ignored.
  std::optional<TorusGrid> table_grid;
  std::vector<Matrix> table;
  /// Declared structural flags.
  bool hermitian = true;
  bool positive = true;
  bool elliptic = true;

  /// (1 + |k|^2)^s · I, order 2s.
  static SymbolSpec bessel_power(double s, int dim = 1, int components = 1);
  /// Single multiplier term a(k)·I.
  static SymbolSpec multiplier(FrequencyProfile profile, double order, int dim = 1,
                               int components = 1);
  /// a(x,k) = g(x)·a(k)·I.
  static SymbolSpec separable(SpectralField x_factor, FrequencyProfile profile, double order,
                              int components = 1);

  /// The grid the x-dependence is stored on, if any.
  std::optional<TorusGrid> native_grid() const;
};

/// Sum of two multiplier or separable specs (term lists concatenated).
SymbolSpec combine(const SymbolSpec& a, const SymbolSpec& b);

/// Values a(x_j, k) at the collocation points of `grid` for one frequency,
/// indexed by point.
std::vector<Matrix> symbol_column(const SymbolSpec& spec, const TorusGrid& grid, const Frequency& k);

struct SymbolClassConstant {
  Frequency alpha{0, 0};
  Frequency beta{0, 0};
  double value = 0.0;
};

struct ValidationReport {
  double hermitian_defect = 0.0;
  bool hermitian = false;
  double reality_defect = 0.0;
  bool reality = false;
  double min_eigenvalue = 0.0;
  bool positive = false;
  /// max ‖a(x,k)^{-1}‖ <k>^r over stored entries; infinite if some entry is singular.
  double ellipticity_constant = 0.0;
  bool elliptic = false;
  /// C_{α,β} ≈ max |Δ_k^α ∂_x^β a| / <k>^{r-|α|}, |α| <= 2, |β| <= 1.
  std::vector<SymbolClassConstant> class_constants;

  bool admissible() const { return hermitian && reality && positive && elliptic; }
};

/// Scans the stored entries of a symbol on `grid` (its native grid, or a
/// d-dimensional N = 64 grid for pure multipliers when omitted).
ValidationReport validate_symbol(const SymbolSpec& spec, double r,
                                 std::optional<TorusGrid> grid = std::nullopt);

/// INI-style symbol definition file; see the README for the layout.
SymbolSpec load_symbol(const std::filesystem::path& path);

}  // namespace epdiff
