#include "epdiff/random.hpp"

#include <cmath>
#include <numbers>

namespace epdiff {

std::uint64_t CounterRng::mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double CounterRng::uniform(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
  std::uint64_t h = mix(key_ ^ mix(a));
  h = mix(h ^ mix(b + 0x51ed27));
  h = mix(h ^ mix(c + 0xa3b195));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
  const double u1 = 1.0 - uniform(a, b, 2 * c);
  const double u2 = uniform(a, b, 2 * c + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SpectralField random_field(const TorusGrid& grid, int components, std::uint64_t seed,
                           std::uint64_t stream, const RandomFieldOptions& options) {
  const CounterRng rng(seed, stream);
  SpectralField f(grid, components);
  const auto key = [](int v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(v) + (1 << 20)); };
  for (int c = 0; c < components; ++c) {
    for (std::size_t i : grid.band_indices()) {
      const Frequency k = grid.frequency(i);
      if (options.max_mode >= 0 && max_norm(k, grid.dim()) > options.max_mode) continue;
      const bool zero = k[0] == 0 && k[1] == 0;
      if (zero && !options.include_mean) continue;
      // Populate one representative of each ±k pair; set_mode fills the mirror.
      if (k[0] < 0 || (k[0] == 0 && k[1] < 0)) continue;
      const std::uint64_t ck = key(k[0]) * 0x100000001b3ULL ^ key(k[1]);
      const double scale = std::pow(TorusGrid::japanese(k), -options.decay);
      const double re = rng.normal(static_cast<std::uint64_t>(c), ck, 0);
      const double im = zero ? 0.0 : rng.normal(static_cast<std::uint64_t>(c), ck, 1);
      f.set_mode(c, k, scale * Complex(re, im) * (zero ? 1.0 : (1.0 / std::numbers::sqrt2)));
    }
  }
  return f;
}

}  // namespace epdiff
