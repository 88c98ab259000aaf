#pragma once

// Deterministic seed derivation. Every component draws from its own stream,
// keyed by (parent seed, component name, index):
//   key = splitmix64(parent ^ fnv1a64(name)) combined with splitmix64(index)
// so adding a component never perturbs the streams of the others.

#include <cstdint>
#include <random>
#include <string_view>

namespace rlattack {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view component,
                                    std::uint64_t index = 0) {
  return splitmix64(splitmix64(parent ^ fnv1a64(component)) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

using Rng = std::mt19937_64;

// Draws built on the raw engine output so results do not depend on the
// standard library's distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform integer in [0, n) by rejection, n >= 1.
inline int uniform_int(Rng& rng, int n) {
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = (~std::uint64_t{0} / un) * un;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return static_cast<int>(v % un);
}

}  // namespace rlattack
