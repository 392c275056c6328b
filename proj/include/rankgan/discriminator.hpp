#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rankgan/corpus.hpp"
#include "rankgan/generator.hpp"
#include "rankgan/ranker.hpp"
#include "rankgan/reward.hpp"

namespace rankgan {

class Checkpoint;

// Binary real-vs-generated classifier for the SeqGAN-style baseline: the
// ranker's CNN encoder followed by a 2-way softmax. Class 1 is "real".
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(CnnEncoder encoder, std::size_t fixed_len);
  static Discriminator init_uniform(EncoderConfig cfg, std::size_t fixed_len,
                                    std::uint64_t seed, double scale = 0.1);

  const CnnEncoder& encoder() const { return encoder_; }
  std::size_t fixed_len() const { return fixed_len_; }

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

  Checkpoint to_checkpoint() const;
  static Discriminator from_checkpoint(const Checkpoint& ckpt);

  // P(real) for `count` sequences, row-major ids.
  std::vector<double> prob_real(std::span<const int> ids, std::size_t count) const;

  Tensor w_cls;  // [feature_dim, 2]
  Tensor b_cls;  // [1, 2]

 private:
  CnnEncoder encoder_;
  std::size_t fixed_len_ = 20;
};

bool operator==(const Discriminator& a, const Discriminator& b);

// Log class probabilities [count, 2].
Var discriminator_log_probs(Tape& tape, const Discriminator& disc, const EncoderVars& enc,
                            Var w_cls, Var b_cls, std::span<const int> ids, std::size_t count);

// One step on the mean cross-entropy over human (label real) and synthetic
// (label generated) sequences. Returns the pre-step loss.
double discriminator_step(Discriminator& disc, std::span<const TokenSeq> human,
                          std::span<const TokenSeq> synthetic, const SgdConfig& cfg);

class DiscriminatorReward : public SequenceReward {
 public:
  explicit DiscriminatorReward(const Discriminator& disc) : disc_(disc) {}
  void score(std::span<const int> ids, std::size_t count, std::size_t len,
             std::span<double> out) const override;

 private:
  const Discriminator& disc_;
};

}  // namespace rankgan
