#include "sherlock/rng.hpp"

#include <limits>
#include <vector>

namespace sherlock {

Rng::Rng(std::initializer_list<std::uint64_t> words) {
  std::vector<std::uint32_t> seeds;
  seeds.reserve(words.size() * 2);
  for (auto w : words) {
    seeds.push_back(static_cast<std::uint32_t>(w));
    seeds.push_back(static_cast<std::uint32_t>(w >> 32));
  }
  std::seed_seq seq(seeds.begin(), seeds.end());
  engine_.seed(seq);
}

// Rejects the top partial bucket so the modulo is unbiased.
std::uint64_t Rng::below(std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

}  // namespace sherlock
