#pragma once

#include <cstdint>

#include "epdiff/field.hpp"

namespace epdiff {

/// Counter-based generator: every value is a pure function of (seed, stream,
/// counters), so results do not depend on evaluation order or resolution.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + 0x9e37))) {}

  /// Uniform in [0,1) for the given counters.
  double uniform(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const;
  /// Standard normal via Box-Muller on two derived uniforms.
  double normal(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const;

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t key_;
};

struct RandomFieldOptions {
  /// Coefficients decay like <k>^{-decay}.
  double decay = 2.0;
  /// Only modes with |k|_∞ <= max_mode are populated (-1: whole band).
  int max_mode = -1;
  /// Also populate the k = 0 mode.
  bool include_mean = true;
};

/// Random real field with normally distributed coefficients scaled by
/// <k>^{-decay}. The coefficient at a frequency depends only on
/// (seed, stream, component, k), so refining N only adds modes.
SpectralField random_field(const TorusGrid& grid, int components, std::uint64_t seed,
                           std::uint64_t stream, const RandomFieldOptions& options = {});

}  // namespace epdiff
