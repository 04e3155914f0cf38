#pragma once

// Portable seeded sampling. std::*_distribution output is implementation
// defined, so everything that must reproduce across platforms draws from the
// raw mt19937_64 stream through these helpers.

#include <cstdint>
#include <random>

namespace queryplan {

using Rng = std::mt19937_64;

/// Uniform integer in [0, n); n must be positive.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = Rng::max() - Rng::max() % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

/// Uniform double in [0, 1) with 53 bits of precision.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform_unit(rng) < p; }

template <typename Container>
void shuffle_in_place(Rng& rng, Container& c) {
  for (std::size_t i = c.size(); i > 1; --i) {
    std::swap(c[i - 1], c[uniform_below(rng, i)]);
  }
}

}  // namespace queryplan
