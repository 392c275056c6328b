#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rankgan/corpus.hpp"
#include "rankgan/discriminator.hpp"
#include "rankgan/generator.hpp"
#include "rankgan/metrics.hpp"
#include "rankgan/oracle.hpp"
#include "rankgan/ranker.hpp"
#include "rankgan/rollout.hpp"

namespace rankgan {

enum class Mode { kRankGan, kBinary, kPgBleu, kMleOnly };

std::string mode_name(Mode m);
Mode parse_mode(const std::string& s);

struct TrainingConfig {
  Mode mode = Mode::kRankGan;
  std::uint64_t master_seed = 1;

  std::size_t pretrain_epochs = 40;
  std::size_t adversarial_rounds = 60;
  std::size_t g_steps = 1;
  std::size_t r_steps = 1;
  // Critic (ranker or discriminator) steps run before the first adversarial round.
  std::size_t critic_pretrain_steps = 50;
  std::size_t batch_size = 64;
  std::size_t ref_size = 1;         // |U|
  std::size_t comparison_size = 1;  // |C|
  std::size_t rollout_n = 16;
  double gamma = 4.0;

  double lr_mle = 20.0;
  double lr_generator = 0.01;
  double lr_ranker = 0.05;
  double clip_norm = 5.0;
  // Moving-average reward baseline; an extension, off by default.
  bool reward_baseline = false;
  double baseline_decay = 0.9;

  std::size_t fixed_len = 20;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t ranker_embed_dim = 32;
  std::vector<std::size_t> ranker_widths = {2, 3, 4};
  std::size_t ranker_filters = 16;

  int bleu_order = 2;
  std::size_t bleu_refs = 64;

  std::size_t eval_samples = 2000;

  // Data. Relative paths resolve against the config file's directory.
  std::filesystem::path corpus;
  std::filesystem::path vocab;   // optional; built from the corpus when empty
  std::filesystem::path oracle;  // optional generator checkpoint used for NLL
  int min_count = 1;
  double validation_fraction = 0.0;

  void validate() const;
  bool ranking_mode() const { return mode == Mode::kRankGan; }
  std::size_t total_epochs() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::string phase;  // "init", "pretrain" or "adversarial"
  double generator_loss = std::numeric_limits<double>::quiet_NaN();
  double critic_loss = std::numeric_limits<double>::quiet_NaN();
  double mean_reward = std::numeric_limits<double>::quiet_NaN();
  double oracle_nll = std::numeric_limits<double>::quiet_NaN();
  double oracle_nll_per_token = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

// Per-epoch training record. The CSV form omits wall time so that it is a
// pure function of (seed, config, corpus); timings go to a separate file.
struct RunLog {
  std::vector<EpochRecord> records;

  std::string to_csv() const;
  std::string timing_csv() const;
  static RunLog from_csv(const std::string& text);
  static const char* csv_header();
};

// ---- generator policy gradient ------------------------------------------

struct PgConfig {
  std::size_t batch_size = 64;
  RolloutConfig rollout;
  SgdConfig sgd{0.01, 5.0};
};

// Gradient (with respect to every generator parameter) of the surrogate loss
//   -(1/B) sum_{b,t} weights[b,t] * log pi(w_{b,t} | w_{b,<t}),
// i.e. the negated score-function estimate of the policy gradient.
Gradients pg_loss_gradients(const GeneratorModel& gen, std::span<const int> ids,
                            std::size_t count, std::size_t len, std::span<const double> weights);

struct PgStepResult {
  double mean_reward = 0.0;       // mean complete-sequence reward of the batch
  std::vector<int> sequences;     // sampled batch, [batch, len]
  std::vector<double> values;     // per-step values before baseline, [batch, len]
};

// Samples a batch, values every step with rollouts against `reward`, and
// takes one ascent step on the expected reward. `baseline` is subtracted
// from every value. Batch row b draws from stream (seed, stream_id, b).
PgStepResult generator_pg_step(GeneratorModel& gen, const SequenceReward& reward,
                               std::size_t len, const PgConfig& cfg, std::uint64_t stream_id,
                               double baseline = 0.0);

// RankGAN form: rewards are R(s | U, C+) from a frozen ranker.
PgStepResult generator_pg_step(GeneratorModel& gen, const RankerModel& ranker,
                               const ReferenceSet& refs, const ComparisonSet& comps_plus,
                               const PgConfig& cfg, std::uint64_t stream_id);

// PG-BLEU form: rewards are sentence BLEU against `refs`.
PgStepResult pg_bleu_step(GeneratorModel& gen, const std::vector<TokenSeq>& refs,
                          const BleuSpec& spec, std::size_t len, const PgConfig& cfg,
                          std::uint64_t stream_id);

// SeqGAN form: rewards are the discriminator's P(real).
PgStepResult binary_pg_step(GeneratorModel& gen, const Discriminator& disc, const PgConfig& cfg,
                            std::uint64_t stream_id);

// ---- ranker ----------------------------------------------------------------

struct RankerObjective {
  double human_term = 0.0;      // mean log R(s | U, C-) over human inputs
  double synthetic_term = 0.0;  // mean log R(s | U, C+) over generated inputs
  double objective() const { return human_term - synthetic_term; }
};

// Value of the ranking objective without touching parameters.
RankerObjective ranker_objective(const RankerModel& ranker, std::span<const TokenSeq> human,
                                 std::span<const TokenSeq> synthetic, const ReferenceSet& refs,
                                 const ComparisonSet& comps_minus, const ComparisonSet& comps_plus);

// One ascent step on the ranking objective. Returns the pre-step loss, which
// is the negated objective.
double ranker_step(RankerModel& ranker, std::span<const TokenSeq> human,
                   std::span<const TokenSeq> synthetic, const ReferenceSet& refs,
                   const ComparisonSet& comps_minus, const ComparisonSet& comps_plus,
                   const SgdConfig& cfg);

// ---- orchestration ---------------------------------------------------------

// Alternating trainer. Every random draw comes from a stream derived from
// (master_seed, epoch, step, row), so a run resumed from any epoch boundary
// continues exactly as the uninterrupted run would have.
class Trainer {
 public:
  Trainer(TrainingConfig cfg, Corpus train, std::optional<Oracle> oracle);

  const TrainingConfig& config() const { return cfg_; }
  const RunLog& log() const { return log_; }
  std::size_t next_epoch() const { return next_epoch_; }
  bool finished() const { return next_epoch_ >= cfg_.total_epochs(); }

  const GeneratorModel& generator() const { return gen_; }
  const RankerModel& ranker() const { return ranker_; }
  const Discriminator& discriminator() const { return disc_; }
  const Corpus& corpus() const { return train_; }

  // Runs epochs until finished or `max_epochs` more have been logged;
  // `on_epoch` fires after each one. Returns the number of epochs run.
  std::size_t run(std::size_t max_epochs = std::numeric_limits<std::size_t>::max(),
                  const std::function<void(const Trainer&)>& on_epoch = {});

  // Takes over the generator and run log of `pretrained`, which must have
  // just finished the MLE phase under the same seed, data and generator
  // settings. The MLE phase does not depend on the mode, so this continues
  // exactly as if this trainer had run those epochs itself.
  void adopt_pretraining(const Trainer& pretrained);
  // Writes models, trainer state and the run log into `dir`.
  void save(const std::filesystem::path& dir) const;
  // Restores state written by save(); the config and corpus must be the ones
  // the saved run used.
  void restore(const std::filesystem::path& dir);

 private:
  EpochRecord run_epoch(std::size_t epoch);
  void mle_epoch(std::size_t epoch, EpochRecord& rec);
  void adversarial_round(std::size_t epoch, EpochRecord& rec);
  double critic_step(std::size_t epoch, std::size_t step);
  std::vector<TokenSeq> draw_human(std::size_t count, Stream purpose,
                                   std::initializer_list<std::uint64_t> coords) const;
  std::vector<TokenSeq> draw_generated(std::size_t count, Stream purpose,
                                       std::initializer_list<std::uint64_t> coords) const;
  void evaluate(std::size_t epoch, EpochRecord& rec) const;

  TrainingConfig cfg_;
  Corpus train_;
  std::optional<Oracle> oracle_;
  GeneratorModel gen_;
  RankerModel ranker_;
  Discriminator disc_;
  RunLog log_;
  std::size_t next_epoch_ = 0;
  double baseline_ = 0.0;
  bool baseline_ready_ = false;
};

// Convenience wrapper: a fresh Trainer run to completion.
RunLog train(const TrainingConfig& cfg, const Corpus& corpus, std::optional<Oracle> oracle);

}  // namespace rankgan
