#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rankgan/corpus.hpp"
#include "rankgan/rng.hpp"
#include "rankgan/tape.hpp"
#include "rankgan/tensor.hpp"

namespace rankgan {

class Checkpoint;

struct GeneratorDims {
  std::size_t vocab = 0;
  std::size_t embed = 32;
  std::size_t hidden = 64;
};

// Single-layer LSTM language model. Gate blocks are laid out [input | forget |
// output | candidate] along the 4*hidden axis.
class GeneratorModel {
 public:
  GeneratorModel() = default;
  explicit GeneratorModel(GeneratorDims dims);

  // uniform(-scale, scale) on every parameter.
  static GeneratorModel init_uniform(GeneratorDims dims, std::uint64_t seed,
                                     double scale = 0.1);
  // stddev * N(0, 1) on every parameter.
  static GeneratorModel init_normal(GeneratorDims dims, std::uint64_t seed, double stddev);

  const GeneratorDims& dims() const { return dims_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  static const std::vector<std::string>& parameter_names();

  Checkpoint to_checkpoint() const;
  static GeneratorModel from_checkpoint(const Checkpoint& ckpt);

  bool is_finite() const;

  Tensor embedding;  // [vocab, embed]
  Tensor w_input;    // [embed, 4*hidden]
  Tensor w_hidden;   // [hidden, 4*hidden]
  Tensor bias;       // [1, 4*hidden]
  Tensor w_out;      // [hidden, vocab]
  Tensor b_out;      // [1, vocab]

 private:
  GeneratorDims dims_;
  std::uint64_t seed_ = 0;
};

bool operator==(const GeneratorModel& a, const GeneratorModel& b);

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;
};

// Hidden/cell state for a batch of rows, row-major [rows, hidden].
struct LstmBatch {
  std::size_t rows = 0;
  std::vector<double> h;
  std::vector<double> c;

  static LstmBatch zeros(std::size_t rows, std::size_t hidden);
  // `rows` copies of row `r` of `src`.
  static LstmBatch broadcast(const LstmBatch& src, std::size_t r, std::size_t rows);
};

// One recurrent step for every row: consumes tokens[r], advances state, and
// writes next-token probabilities (or log-probabilities) into out[rows, vocab].
void step_batch(const GeneratorModel& model, std::span<const int> tokens,
                LstmBatch& state, std::span<double> out, bool log_probs = false);

std::pair<std::vector<double>, LstmState> step(const GeneratorModel& model, int token,
                                               const LstmState& state);
LstmState initial_state(const GeneratorModel& model);

// Feeds BOS and draws `len` tokens. Fixed length: EOS does not stop generation.
TokenSeq sample(const GeneratorModel& model, std::size_t len, Rng& rng);
// One sequence per rng; rows sampled together. Output is [rngs.size(), len].
std::vector<int> sample_rows(const GeneratorModel& model, std::size_t len,
                             std::span<Rng> rngs);
// Continues `state` (one row per rng) for `steps` tokens starting from
// `next_probs`, the distribution the state currently predicts.
void continue_rows(const GeneratorModel& model, LstmBatch& state,
                   std::vector<double> next_probs, std::size_t steps, std::span<Rng> rngs,
                   std::span<int> out, std::size_t out_stride, std::size_t out_offset);

// -sum_t log p(w_t | w_<t), BOS-fed, over all positions of the sequence (nats).
double nll(const GeneratorModel& model, std::span<const int> ids);
inline double nll(const GeneratorModel& model, const TokenSeq& seq) {
  return nll(model, seq.ids);
}
// nll for `count` sequences of length `len`, row-major.
std::vector<double> nll_rows(const GeneratorModel& model, std::span<const int> ids,
                             std::size_t count, std::size_t len);

// Parameters placed on a tape, either as gradient-carrying leaves or constants.
struct GeneratorVars {
  Var embedding, w_input, w_hidden, bias, w_out, b_out;

  static GeneratorVars on(Tape& tape, const GeneratorModel& model, bool trainable);
};

// Teacher-forced log p(w_t | w_<t) for a batch of equal-length sequences,
// shape [batch, len]. `ids` is row-major [batch, len].
Var sequence_log_probs(Tape& tape, const GeneratorVars& vars, std::span<const int> ids,
                       std::size_t batch, std::size_t len);

// A single differentiable LSTM step; returns (logits, h, c).
struct LstmStepVars {
  Var logits, h, c;
};
LstmStepVars lstm_step(Tape& tape, const GeneratorVars& vars, std::span<const int> tokens,
                       Var h, Var c);

struct SgdConfig {
  double learning_rate = 0.5;
  double clip_norm = 5.0;
};

// Gradient descent on every parameter present in `grads`, after clipping the
// global norm to cfg.clip_norm (<= 0 disables). Returns the pre-clip norm.
// Throws TrainingAborted on a non-finite gradient.
double apply_sgd(std::span<Tensor* const> params, Gradients& grads, const SgdConfig& cfg);

// One MLE step on the mean per-token NLL of `batch`; returns the pre-step loss.
double mle_step(GeneratorModel& model, std::span<const TokenSeq> batch, const SgdConfig& cfg);

std::vector<int> flatten(std::span<const TokenSeq> seqs, std::size_t len);

}  // namespace rankgan
