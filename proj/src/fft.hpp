#pragma once

#include <complex>
#include <vector>

namespace epdiff::detail {

enum class Direction { forward, backward };

/// Unnormalized complex DFT on an M^d grid (row-major), out of place.
/// forward uses e^{-2πi k·x}, backward e^{+2πi k·x}.
void fft(const std::vector<std::complex<double>>& in, std::vector<std::complex<double>>& out,
         int dim, int m, Direction dir);

}  // namespace epdiff::detail
