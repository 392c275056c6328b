#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace rankgan {

using Rng = std::mt19937_64;

// Named purposes for derived streams, so two call sites never share one.
enum class Stream : std::uint64_t {
  kInit = 1,
  kShuffle,
  kGeneratorBatch,
  kRollout,
  kRankerBatch,
  kReferences,
  kComparison,
  kEval,
  kSynthetic,
  kSplit,
  kDiscriminator,
  kSample,
};

std::uint64_t splitmix64(std::uint64_t x);

// Seed for the stream identified by (master, purpose, coordinates...). Pure
// function of its inputs, which is what makes parallel work scheduling-invariant.
std::uint64_t derive_seed(std::uint64_t master, Stream purpose,
                          std::initializer_list<std::uint64_t> coords = {});

inline Rng make_rng(std::uint64_t master, Stream purpose,
                    std::initializer_list<std::uint64_t> coords = {}) {
  return Rng(derive_seed(master, purpose, coords));
}

// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Inverse-CDF draw from a probability vector. Falls back to the last index
// with nonzero mass when rounding leaves the cumulative sum short of u.
int sample_categorical(std::span<const double> probs, Rng& rng);

}  // namespace rankgan
