#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rankgan/corpus.hpp"
#include "rankgan/ops.hpp"
#include "rankgan/reward.hpp"
#include "rankgan/tape.hpp"
#include "rankgan/tensor.hpp"

namespace rankgan {

class Checkpoint;

struct EncoderConfig {
  std::size_t vocab = 0;
  std::size_t embed = 32;
  std::vector<std::size_t> widths = {2, 3, 4};
  std::size_t filters_per_width = 16;
  ops::Activation activation = ops::Activation::kTanh;
};

// Text-CNN sentence encoder: embed -> per-width conv + max-over-time -> concat.
class CnnEncoder {
 public:
  CnnEncoder() = default;
  explicit CnnEncoder(EncoderConfig cfg);
  static CnnEncoder init_uniform(EncoderConfig cfg, std::uint64_t seed, double scale = 0.1);

  const EncoderConfig& config() const { return cfg_; }
  std::size_t feature_dim() const { return cfg_.widths.size() * cfg_.filters_per_width; }

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::vector<std::string> parameter_names() const;

  void write_to(Checkpoint& ckpt) const;
  static CnnEncoder read_from(const Checkpoint& ckpt);

  Tensor embedding;              // [vocab, embed]
  std::vector<Tensor> filters;   // per width: [filters_per_width, width*embed]
  std::vector<Tensor> biases;    // per width: [1, filters_per_width]

 private:
  EncoderConfig cfg_;
};

struct EncoderVars {
  Var embedding;
  std::vector<Var> filters;
  std::vector<Var> biases;

  static EncoderVars on(Tape& tape, const CnnEncoder& enc, bool trainable);
};

// Features [count, feature_dim] for `count` sequences of length `len`.
Var encode_sequences(Tape& tape, const EncoderVars& vars, const EncoderConfig& cfg,
                     std::span<const int> ids, std::size_t count, std::size_t len);

struct FeatureVec {
  std::vector<double> y;

  double norm() const;
  bool zero_norm() const { return norm() == 0.0; }
};

class RankerModel {
 public:
  RankerModel() = default;
  RankerModel(CnnEncoder encoder, double gamma, std::size_t fixed_len);

  const CnnEncoder& encoder() const { return encoder_; }
  CnnEncoder& mutable_encoder() { return encoder_; }
  double gamma() const { return gamma_; }
  void set_gamma(double gamma);
  std::size_t fixed_len() const { return fixed_len_; }

  // Bumped by every parameter update; reference caches compare against it.
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  std::vector<Tensor*> parameters() { return encoder_.parameters(); }
  std::vector<const Tensor*> parameters() const { return encoder_.parameters(); }

  Checkpoint to_checkpoint() const;
  static RankerModel from_checkpoint(const Checkpoint& ckpt);

  // Feature rows for `count` sequences of the configured fixed length.
  std::vector<double> encode_rows(std::span<const int> ids, std::size_t count) const;

 private:
  CnnEncoder encoder_;
  double gamma_ = 4.0;
  std::size_t fixed_len_ = 20;
  std::uint64_t version_ = 0;
};

bool operator==(const RankerModel& a, const RankerModel& b);

enum class Polarity { kPlus, kMinus };

// Sentences an input is ranked against. C+ holds human-written sentences (for
// scoring generated inputs), C- generated ones (for scoring human inputs).
struct ComparisonSet {
  std::vector<TokenSeq> sentences;
  Polarity polarity = Polarity::kPlus;
};

struct ReferenceSet {
  std::vector<TokenSeq> sentences;
};

FeatureVec encode(const RankerModel& ranker, const TokenSeq& seq);

// Cosine similarity. Throws DegenerateFeatureError on a zero-norm input.
double relevance(const FeatureVec& ys, const FeatureVec& yu);

// exp(gamma*alpha_s + shift) / (exp(gamma*alpha_s + shift) + sum_c exp(gamma*alpha_c + shift)).
// `shift` only exists to exercise shift invariance.
double rank_score_from_relevances(double alpha_s, std::span<const double> alpha_others,
                                  double gamma, double shift = 0.0);

// P(s | u, C): softmax of gamma-scaled relevances over C' = C + {s}.
double rank_score(const TokenSeq& s, const TokenSeq& u, const ComparisonSet& c,
                  const RankerModel& ranker);
// R(s | U, C): mean of rank_score over the references.
double expected_rank(const TokenSeq& s, const ReferenceSet& u, const ComparisonSet& c,
                     const RankerModel& ranker);

// Reference and comparison features computed once and reused for many
// inputs. Bound to the ranker version it was built from.
class RankContext {
 public:
  RankContext(const RankerModel& ranker, const ReferenceSet& refs, const ComparisonSet& comps);

  double rank_score(std::span<const double> feature, std::size_t ref) const;
  double expected_rank(std::span<const double> feature) const;
  std::uint64_t version() const { return version_; }
  std::size_t reference_count() const { return ref_count_; }

 private:
  double gamma_;
  std::size_t dim_;
  std::size_t ref_count_;
  std::uint64_t version_;
  std::vector<double> refs_;      // normalized [refs, dim]
  std::vector<double> comp_lse_;  // per ref: log sum_c exp(gamma * alpha(c|u)); -inf if C empty
};

// R(s | U, C) as a reward for complete sequences.
class RankReward : public SequenceReward {
 public:
  RankReward(const RankerModel& ranker, const ReferenceSet& refs, const ComparisonSet& comps);
  void score(std::span<const int> ids, std::size_t count, std::size_t len,
             std::span<double> out) const override;

 private:
  const RankerModel& ranker_;
  RankContext context_;
};

// Differentiable log R(s | U, C) for each of `count` inputs; returns [count].
// All sequence buffers are row-major with the ranker's fixed length.
Var log_expected_rank(Tape& tape, const EncoderVars& vars, const RankerModel& ranker,
                      std::span<const int> inputs, std::size_t count,
                      std::span<const int> refs, std::size_t ref_count,
                      std::span<const int> comps, std::size_t comp_count);

}  // namespace rankgan
