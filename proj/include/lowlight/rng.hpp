// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>

namespace lowlight {

/// Counter-based SplitMix64 stream.
///
/// The k-th 64-bit output of a stream keyed by `seed` is
///
///     mix64(mix64(seed) + k * 0x9E3779B97F4A7C15),  k = 1, 2, ...
///
/// where mix64 is the SplitMix64 finalizer (xor-shift 30/27/31 with the
/// multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB). Uniform doubles
/// take the top 53 bits; normals use the Box-Muller transform on two
/// uniforms, caching the second variate. Everything is integer arithmetic
/// except the final float conversions, so streams are reproducible across
/// languages.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on (0, 1].
  double uniform_open_low();
  double normal();
  /// Poisson variate. Multiplication method below mean 10, PTRS above.
  std::int64_t poisson(double mean);
  /// Uniform integer on [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  bool bernoulli(double p);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> cached_normal_;
};

std::uint64_t mix64(std::uint64_t x);

/// Seed for a derived stream (per-image, per-step, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return base ^ index;
}

}  // namespace lowlight
