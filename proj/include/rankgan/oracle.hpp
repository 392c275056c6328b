#pragma once

#include <cstddef>
#include <cstdint>

#include "rankgan/corpus.hpp"
#include "rankgan/generator.hpp"

namespace rankgan {

// A randomly initialized LSTM standing in for the true data distribution.
// Parameters are fixed at construction and only exposed read-only.
class Oracle {
 public:
  explicit Oracle(GeneratorModel model) : model_(std::move(model)) {}

  const GeneratorModel& model() const { return model_; }
  std::uint64_t seed() const { return model_.seed(); }
  std::size_t vocab_size() const { return model_.dims().vocab; }

 private:
  GeneratorModel model_;
};

inline constexpr double kOracleInitStd = 1.0;

// Normal(0, init_std) parameters drawn from `seed`.
Oracle make_oracle(std::uint64_t seed, GeneratorDims dims, double init_std = kOracleInitStd);

// `count` sequences of length `len` sampled from the oracle, over an identity
// vocabulary. Sequence i draws from stream (seed, i).
Corpus generate_synthetic(const Oracle& oracle, std::size_t count, std::size_t len,
                          std::uint64_t seed);

struct NllEstimate {
  double mean = 0.0;       // nats per sequence
  double std_error = 0.0;  // of the mean
  double per_token = 0.0;
  std::size_t samples = 0;
};

// Mean oracle NLL of n_samples sequences drawn from `gen`. Sample i draws from
// stream (seed, i); reductions run in sample order.
NllEstimate oracle_nll(const Oracle& oracle, const GeneratorModel& gen, std::size_t n_samples,
                       std::size_t len, std::uint64_t seed);
// Single-threaded reference; bitwise-identical to oracle_nll.
NllEstimate oracle_nll_serial(const Oracle& oracle, const GeneratorModel& gen,
                              std::size_t n_samples, std::size_t len, std::uint64_t seed);

// Per-sample oracle NLL values behind oracle_nll.
std::vector<double> oracle_nll_samples(const Oracle& oracle, const GeneratorModel& gen,
                                       std::size_t n_samples, std::size_t len,
                                       std::uint64_t seed, bool parallel = true);

}  // namespace rankgan
