#pragma once

#include <cstdint>
#include <random>

namespace inhomo {

/// Seed handling.
///
/// Every random stream is a std::mt19937_64 whose seed is derived from a
/// 64-bit master seed with the SplitMix64 finalizer. Substreams are keyed by
/// a small integer so that, for example, the spike and the noise of one
/// instance never share state, and sweep task k always receives the same
/// stream regardless of how tasks are scheduled.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable hash of (master, index): splitmix64(splitmix64(master) ^ index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ index);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

// Substream identifiers for instance generation.
enum Stream : std::uint64_t {
  kSpikeStream = 0,
  kNoiseStream = 1,
  kInitStream = 2,
};

} // namespace inhomo
