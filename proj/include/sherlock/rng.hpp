#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace sherlock {

/// Seeded generator used for initialization, dropout masks and shuffles.
///
/// Wraps std::mt19937_64 seeded through std::seed_seq; both algorithms are
/// fixed by the C++ standard, so streams are identical across toolchains.
/// Uniform doubles are derived from the top 53 bits directly rather than
/// through std::uniform_real_distribution, whose algorithm is unspecified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : Rng({seed}) {}
  Rng(std::initializer_list<std::uint64_t> words);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::iter_swap(first + (i - 1), first + j);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sherlock
