#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rankgan/generator.hpp"
#include "rankgan/ranker.hpp"
#include "rankgan/reward.hpp"

namespace rankgan {

struct RolloutConfig {
  std::size_t n_paths = 16;
  std::uint64_t seed = 0;
};

// Mean reward of n_paths completions of `prefix` (the first prefix.size()
// tokens fixed, the rest sampled from the generator up to `len`). Path k of
// this call draws from the stream (cfg.seed, stream_id, 0, prefix.size(), k).
double rollout_value(const GeneratorModel& gen, const SequenceReward& reward,
                     std::span<const int> prefix, std::size_t len, const RolloutConfig& cfg,
                     std::uint64_t stream_id = 0);

// Eq.-5 value for a ranker: completions scored by R(s_r | U, C+).
double rollout_value(const GeneratorModel& gen, const RankerModel& ranker,
                     std::span<const int> prefix, const ReferenceSet& refs,
                     const ComparisonSet& comps_plus, const RolloutConfig& cfg,
                     std::uint64_t stream_id = 0);

// Per-step values for a batch of complete sequences (row-major [count, len]).
// Entry [b, t] values the prefix of length t+1: a rollout estimate for t <
// len-1 and the sequence's own reward at t = len-1. Rollouts for row b, prefix
// length p, path k use stream (cfg.seed, stream_id, b, p, k), and every
// reduction runs in index order, so the result does not depend on how rows are
// scheduled across threads.
std::vector<double> rollout_values(const GeneratorModel& gen, const SequenceReward& reward,
                                   std::span<const int> seqs, std::size_t count,
                                   std::size_t len, const RolloutConfig& cfg,
                                   std::uint64_t stream_id);

// Single-threaded reference for rollout_values; bitwise-identical output.
std::vector<double> rollout_values_serial(const GeneratorModel& gen,
                                          const SequenceReward& reward,
                                          std::span<const int> seqs, std::size_t count,
                                          std::size_t len, const RolloutConfig& cfg,
                                          std::uint64_t stream_id);

}  // namespace rankgan
