#pragma once

#include <cstdint>
#include <random>

namespace hjlab {

/// The single random engine type used throughout; callers own the stream.
using RandomStream = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Seed of the stream with index `index` under root seed `root`:
/// mix64(root ^ mix64(index + 1)). Distinct indices give unrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return mix64(root ^ mix64(index + 1));
}

inline RandomStream derive_stream(std::uint64_t root, std::uint64_t index) {
  return RandomStream(derive_seed(root, index));
}

/// Uniform double in [0, 1) with 53 random bits; identical across standard libraries.
inline double uniform01(RandomStream& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace hjlab
