#pragma once

// Deterministic random streams: std::mt19937_64 plus the helpers below,
// never the standard distributions.

#include <cstdint>
#include <random>
#include <string_view>

namespace mchr {

// splitmix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// 64-bit FNV-1a.
constexpr std::uint64_t hash_string(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view a,
                                    std::uint64_t b = 0) noexcept {
  return mix64(mix64(seed ^ hash_string(a)) ^ mix64(b + 0x632be59bd9b4e019ULL));
}

// Uniform double in [0, 1) from the top 53 bits.
inline double unit_double(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, bound) by rejection; bound must be > 0.
inline std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % bound;
}

}  // namespace mchr
