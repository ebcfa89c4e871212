#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace dwt {

/// Seeded random stream. The engine sequence is fixed by the standard, and the
/// conversions below avoid implementation-defined distributions, so a given
/// seed yields the same values on every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dwt
