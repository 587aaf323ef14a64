#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rgk {

// SplitMix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a over the tag bytes.
inline constexpr std::uint64_t tag_hash(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed splitting rule: stream = mix64(seed ^ mix64(fnv1a(tag))).
// Every component derives its generator from (global seed, component tag).
inline constexpr std::uint64_t stream_seed(std::uint64_t seed, std::string_view tag) noexcept {
  return mix64(seed ^ mix64(tag_hash(tag)));
}

inline constexpr std::uint64_t stream_seed(std::uint64_t seed, std::string_view tag,
                                           std::uint64_t index) noexcept {
  return mix64(stream_seed(seed, tag) + mix64(index + 1));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::string_view tag) { return Rng(stream_seed(seed, tag)); }

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace rgk
