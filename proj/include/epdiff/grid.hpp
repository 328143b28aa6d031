#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

namespace epdiff {

/// Integer frequency in Z^d. Unused trailing axes are zero.
using Frequency = std::array<int, 2>;

/// Position on the torus [0,1)^d. Unused trailing axes are zero.
using Point = std::array<double, 2>;

/// Uniform collocation grid on the flat torus T^d = [0,1)^d, d ∈ {1,2}.
///
/// Coefficient arrays are stored in FFT order: linear index
/// i = i_0 N^{d-1} + ... + i_{d-1}, with axis index i_a mapping to frequency
/// i_a for i_a < N/2 and i_a - N otherwise. The Nyquist row i_a = N/2 is kept
/// in storage but is always zero. The retained band is {-N/2+1, ..., N/2-1}^d.
class TorusGrid {
 public:
  TorusGrid(int dim, int n);

  int dim() const { return dim_; }
  int n() const { return n_; }
  /// K = N/2; retained frequencies satisfy |k_j| <= K - 1.
  int cutoff() const { return n_ / 2; }
  int max_frequency() const { return n_ / 2 - 1; }
  double spacing() const { return 1.0 / n_; }

  /// N^d, the number of collocation points and stored coefficients.
  std::size_t size() const { return size_; }
  /// (N-1)^d, the number of band frequencies (Nyquist excluded).
  std::size_t band_size() const { return band_->indices.size(); }

  Frequency frequency(std::size_t index) const;
  bool is_nyquist(std::size_t index) const;
  bool in_band(const Frequency& k) const;
  /// Storage index of a band frequency. Precondition: in_band(k).
  std::size_t index_of(const Frequency& k) const;
  /// Storage index of -k.
  std::size_t mirror(std::size_t index) const { return band_->mirror[index]; }

  /// Storage indices of the band, in storage order. Dense operators use this
  /// ordering for their basis.
  const std::vector<std::size_t>& band_indices() const { return band_->indices; }
  /// Position of a storage index within band_indices(), or -1 for Nyquist.
  std::ptrdiff_t band_position(std::size_t index) const { return band_->position[index]; }

  Point point(std::size_t index) const;
  std::vector<Point> points() const;

  /// <k> = (1 + |k|^2)^{1/2}
  static double japanese(const Frequency& k);

  bool operator==(const TorusGrid& other) const { return dim_ == other.dim_ && n_ == other.n_; }
  bool operator!=(const TorusGrid& other) const { return !(*this == other); }

 private:
  struct Band {
    std::vector<std::size_t> indices;
    std::vector<std::ptrdiff_t> position;
    std::vector<std::size_t> mirror;
  };

  int dim_;
  int n_;
  std::size_t size_;
  std::shared_ptr<const Band> band_;
};

/// |k|_∞ over the active axes.
int max_norm(const Frequency& k, int dim);

/// Wrap a real number into [0,1).
double wrap_unit(double x);

/// Signed representative of x modulo 1 in [-1/2, 1/2).
double wrap_signed(double x);

}  // namespace epdiff
