#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace macrpo {

using Rng = std::mt19937_64;

// Independent stream for (seed, tags...). Used so that every environment,
// evaluation episode, and optimizer shuffle draws from its own generator and
// results do not depend on execution order across threads.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (std::uint64_t t : tags) {
    words.push_back(static_cast<std::uint32_t>(t));
    words.push_back(static_cast<std::uint32_t>(t >> 32));
  }
  std::seed_seq full(words.begin(), words.end());
  return Rng(full);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace macrpo
