// SPDX-License-Identifier: Apache-2.0
//
// Seeded randomness. All draws go through explicitly implemented transforms
// (not std::*_distribution) so byte-level reproducibility never depends on
// standard-library internals. mt19937_64 output itself is fully specified.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mavloc/core.hpp"

namespace mavloc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Independent generator for a (seed, stream) pair. Per-record streams keep
/// results identical under any processing order.
inline std::mt19937_64 derive_stream(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0xa0761d6478bd642full * (stream + 1));
  const std::uint64_t a = splitmix64(s);
  const std::uint64_t b = splitmix64(s);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

/// Uniform draw in [0, 1) with 53-bit resolution.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller (stateless; two uniforms per value).
inline double gaussian(std::mt19937_64& g) {
  const double u1 = 1.0 - uniform01(g);  // (0, 1]
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

/// Uniform integer in [0, n); multiply-shift, n must be > 0.
inline std::size_t bounded(std::mt19937_64& g, std::size_t n) {
  using u128 = unsigned __int128;
  return static_cast<std::size_t>((static_cast<u128>(g()) * static_cast<u128>(n)) >> 64);
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& g) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[bounded(g, i)]);
}

}  // namespace mavloc
