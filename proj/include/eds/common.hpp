#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace eds {

// Error categories map onto CLI exit codes (see tools/eds_slads.cpp).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent streams from a base seed.
constexpr std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a) {
  return mix_seed(mix_seed(seed) ^ mix_seed(a + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b, std::uint64_t c) {
  return derive_seed(derive_seed(seed, a, b), c);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(mix_seed(seed)); }

// Stream tags so that unrelated consumers of one seed never share a stream.
namespace stream {
inline constexpr std::uint64_t kMorphology = 0x11;
inline constexpr std::uint64_t kLayout = 0x12;
inline constexpr std::uint64_t kLibrary = 0x13;
inline constexpr std::uint64_t kNoisePixels = 0x14;
inline constexpr std::uint64_t kPixelSpectrum = 0x15;
inline constexpr std::uint64_t kNetInit = 0x21;
inline constexpr std::uint64_t kTrainData = 0x22;
inline constexpr std::uint64_t kSampling = 0x31;
inline constexpr std::uint64_t kPairs = 0x41;
}  // namespace stream

}  // namespace eds
