#pragma once

// Every random draw in the pipeline comes from a named substream of one
// master seed, so a single --seed reproduces a whole run.

#include <cstdint>
#include <random>
#include <string_view>

namespace netsentry {

using Rng = std::mt19937_64;

inline Rng substream(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the name keeps streams independent of declaration order
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

namespace stream {
inline constexpr std::string_view AugBase = "augbase";
inline constexpr std::string_view AugmentNoise = "augment-noise";
inline constexpr std::string_view Init = "init";
inline constexpr std::string_view Dropout = "dropout";
inline constexpr std::string_view Shuffle = "shuffle";
inline constexpr std::string_view Synth = "synth";
} // namespace stream

inline double uniform(Rng &rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::int64_t uniform_int(Rng &rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

inline double normal(Rng &rng, double mean, double sd) { return std::normal_distribution<double>(mean, sd)(rng); }

} // namespace netsentry
