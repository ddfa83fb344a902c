#pragma once

#include <cstdint>

namespace strokewave {

/// Seeded 64-bit generator (splitmix64 state advance).
///
/// The stream is a plain value: copying it forks an identical sequence, and
/// every draw advances the state by exactly one step (normal() takes two).
/// Output is bit-reproducible for a given seed on any IEEE-754 platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() noexcept;
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) noexcept;
  /// Box-Muller normal draw; consumes two uniforms.
  double normal(double mean = 0.0, double stddev = 1.0) noexcept;
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }

  std::uint64_t state() const noexcept { return state_; }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t state_;
};

/// Derives an independent sub-seed from a base seed and a stream index.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept;

}  // namespace strokewave
