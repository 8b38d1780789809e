#pragma once

#include <cstdint>
#include <random>

namespace sqw {

using Rng = std::mt19937_64;

// Fixed stream tags used when splitting a master seed per estimator.
enum class StreamTag : std::uint64_t {
  Family = 1,
  Disorder = 2,
  FractionalMoment = 3,
  SpectralAverage = 4,
  GapProbability = 5,
  Fmec = 6,
  Decay = 7,
  DynLoc = 8,
  Smallness = 9,
  Identities = 10,
  Spectrum = 11,
};

/// SplitMix64 finalizer; bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

/// Splitting rule: (master seed, estimator tag) -> estimator seed.
std::uint64_t derive_seed(std::uint64_t master, StreamTag tag);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b);

/// Independent stream for realization `index` under `seed`.
Rng make_stream(std::uint64_t seed, std::uint64_t index);

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace sqw
