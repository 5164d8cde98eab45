#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cavwatch {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Sub-seed for a named stage: splitmix64(master ^ fnv1a64(name)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stage) {
  return splitmix64(master ^ fnv1a64(stage));
}

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Engine &eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform index in [0, n) by rejection, independent of the standard library's distributions.
inline std::size_t uniform_index(Engine &eng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = Engine::max() - Engine::max() % bound;
  std::uint64_t r;
  do {
    r = eng();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

}  // namespace cavwatch
