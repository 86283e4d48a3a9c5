#pragma once

#include <cstdint>

namespace camegrad {

/// Counter-based generator: draw i is splitmix64(seed + (i + 1) * golden gamma).
/// The whole state is (seed, counter), so a stream can be reproduced or
/// resumed exactly from those two integers.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed = 0, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64();

  /// Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller. Every call consumes exactly two uniforms
  /// (u1, u2) and returns sqrt(-2 ln u1) * cos(2 pi u2); the sine branch is
  /// discarded so the stream position never depends on call history.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace camegrad
