#include "rankgan/adversarial.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#include "rankgan/checkpoint.hpp"
#include "rankgan/error.hpp"
#include "rankgan/rng.hpp"

namespace rankgan {
namespace {

// Step coordinates for critic warm-up, kept clear of per-round step indices.
constexpr std::uint64_t kWarmupStep = 1u << 20;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw FormatError("bad number in run log: '" + s + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

PgStepResult finish_pg_step(GeneratorModel& gen, std::vector<int> ids, std::vector<double> values,
                            std::size_t count, std::size_t len, const PgConfig& cfg,
                            double baseline) {
  PgStepResult result;
  double total = 0.0;
  for (std::size_t b = 0; b < count; ++b) total += values[b * len + len - 1];
  result.mean_reward = total / static_cast<double>(count);

  std::vector<double> weights = values;
  if (baseline != 0.0)
    for (double& w : weights) w -= baseline;
  Gradients grads = pg_loss_gradients(gen, ids, count, len, weights);
  auto params = gen.parameters();
  apply_sgd(params, grads, cfg.sgd);
  result.sequences = std::move(ids);
  result.values = std::move(values);
  return result;
}

// Index in [0, n) from one uniform draw; avoids the library-defined
// behaviour of std::uniform_int_distribution.
std::size_t uniform_index(Rng& rng, std::size_t n) {
  const auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return std::min(i, n - 1);
}

std::vector<int> sample_batch(const GeneratorModel& gen, std::size_t count, std::size_t len,
                              std::uint64_t seed, std::uint64_t stream_id) {
  std::vector<Rng> rngs;
  rngs.reserve(count);
  for (std::size_t b = 0; b < count; ++b)
    rngs.push_back(make_rng(seed, Stream::kGeneratorBatch, {stream_id, b}));
  return sample_rows(gen, len, rngs);
}

}  // namespace

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kRankGan: return "rankgan";
    case Mode::kBinary: return "binary";
    case Mode::kPgBleu: return "pg_bleu";
    case Mode::kMleOnly: return "mle_only";
  }
  return "unknown";
}

Mode parse_mode(const std::string& s) {
  if (s == "rankgan") return Mode::kRankGan;
  if (s == "binary") return Mode::kBinary;
  if (s == "pg_bleu") return Mode::kPgBleu;
  if (s == "mle_only") return Mode::kMleOnly;
  throw ConfigError("unknown mode '" + s + "' (expected rankgan, binary, pg_bleu or mle_only)");
}

void TrainingConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (fixed_len < 1) throw ConfigError("fixed_len must be at least 1");
  if (mode == Mode::kRankGan && (ref_size < 1 || comparison_size < 1)) {
    throw ConfigError("ranking mode needs ref_size >= 1 and comparison_size >= 1");
  }
  if (mode != Mode::kMleOnly && adversarial_rounds > 0 && rollout_n < 1) {
    throw ConfigError("rollout_n must be at least 1");
  }
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  for (double lr : {lr_mle, lr_generator, lr_ranker}) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rates must be finite and >= 0");
  }
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) {
    throw ConfigError("baseline_decay must be in [0, 1)");
  }
  if (embed_dim < 1 || hidden_dim < 1 || ranker_embed_dim < 1 || ranker_filters < 1) {
    throw ConfigError("model dimensions must be at least 1");
  }
  if (ranker_widths.empty()) throw ConfigError("ranker_widths must list at least one width");
  for (std::size_t w : ranker_widths) {
    if (w < 1 || w > fixed_len) throw ConfigError("ranker widths must lie in [1, fixed_len]");
  }
  if (bleu_order < 1) throw ConfigError("bleu_order must be at least 1");
  if (mode == Mode::kPgBleu && bleu_refs < 1) throw ConfigError("bleu_refs must be at least 1");
  if (min_count < 1) throw ConfigError("min_count must be at least 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must be in [0, 1)");
  }
}

std::size_t TrainingConfig::total_epochs() const {
  return 1 + pretrain_epochs + (mode == Mode::kMleOnly ? 0 : adversarial_rounds);
}

// ---- RunLog ------------------------------------------------------------------

const char* RunLog::csv_header() {
  return "epoch,phase,generator_loss,critic_loss,mean_reward,oracle_nll,oracle_nll_per_token";
}

std::string RunLog::to_csv() const {
  std::string out = std::string(csv_header()) + "\n";
  for (const EpochRecord& r : records) {
    out += std::to_string(r.epoch) + "," + r.phase + "," + format_double(r.generator_loss) + "," +
           format_double(r.critic_loss) + "," + format_double(r.mean_reward) + "," +
           format_double(r.oracle_nll) + "," + format_double(r.oracle_nll_per_token) + "\n";
  }
  return out;
}

std::string RunLog::timing_csv() const {
  std::string out = "epoch,wall_seconds\n";
  for (const EpochRecord& r : records) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", r.wall_seconds);
    out += std::to_string(r.epoch) + "," + buf + "\n";
  }
  return out;
}

RunLog RunLog::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) {
    throw FormatError("run log does not start with the expected header");
  }
  RunLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 7) throw FormatError("run log row has " + std::to_string(cells.size()) +
                                             " columns, expected 7");
    EpochRecord r;
    std::size_t epoch = 0;
    auto [ptr, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), epoch);
    if (ec != std::errc() || ptr != cells[0].data() + cells[0].size()) {
      throw FormatError("bad epoch index in run log: '" + cells[0] + "'");
    }
    if (!log.records.empty() && epoch <= log.records.back().epoch) {
      throw FormatError("run log epochs are not increasing");
    }
    r.epoch = epoch;
    r.phase = cells[1];
    r.generator_loss = parse_double(cells[2]);
    r.critic_loss = parse_double(cells[3]);
    r.mean_reward = parse_double(cells[4]);
    r.oracle_nll = parse_double(cells[5]);
    r.oracle_nll_per_token = parse_double(cells[6]);
    log.records.push_back(std::move(r));
  }
  return log;
}

// ---- policy gradient ---------------------------------------------------------

Gradients pg_loss_gradients(const GeneratorModel& gen, std::span<const int> ids,
                            std::size_t count, std::size_t len, std::span<const double> weights) {
  if (count == 0) throw UsageError("policy gradient needs a nonempty batch");
  if (ids.size() != count * len || weights.size() != count * len) {
    throw UsageError("policy gradient inputs must be [count, len]");
  }
  Tape tape;
  GeneratorVars vars = GeneratorVars::on(tape, gen, true);
  Var lp = sequence_log_probs(tape, vars, ids, count, len);
  Var w = tape.constant(Tensor({count, len}, std::vector<double>(weights.begin(), weights.end())));
  Var loss = ops::scale(ops::sum(ops::mul(lp, w)), -1.0 / static_cast<double>(count));
  if (!std::isfinite(loss.value().item())) throw TrainingAborted("non-finite policy-gradient loss");
  Gradients grads = tape.backward(loss);
  if (!grads.all_finite()) throw TrainingAborted("non-finite policy gradient");
  return grads;
}

PgStepResult generator_pg_step(GeneratorModel& gen, const SequenceReward& reward,
                               std::size_t len, const PgConfig& cfg, std::uint64_t stream_id,
                               double baseline) {
  if (cfg.batch_size < 1) throw UsageError("policy-gradient batch size must be at least 1");
  std::vector<int> ids = sample_batch(gen, cfg.batch_size, len, cfg.rollout.seed, stream_id);
  std::vector<double> values =
      rollout_values(gen, reward, ids, cfg.batch_size, len, cfg.rollout, stream_id);
  return finish_pg_step(gen, std::move(ids), std::move(values), cfg.batch_size, len, cfg,
                        baseline);
}

PgStepResult generator_pg_step(GeneratorModel& gen, const RankerModel& ranker,
                               const ReferenceSet& refs, const ComparisonSet& comps_plus,
                               const PgConfig& cfg, std::uint64_t stream_id) {
  const RankReward reward(ranker, refs, comps_plus);
  return generator_pg_step(gen, reward, ranker.fixed_len(), cfg, stream_id);
}

PgStepResult pg_bleu_step(GeneratorModel& gen, const std::vector<TokenSeq>& refs,
                          const BleuSpec& spec, std::size_t len, const PgConfig& cfg,
                          std::uint64_t stream_id) {
  if (refs.empty()) throw UsageError("PG-BLEU needs at least one reference");
  std::vector<std::vector<int>> ref_ids;
  ref_ids.reserve(refs.size());
  for (const TokenSeq& r : refs)
    ref_ids.push_back(spec.strip_special ? strip_special(r.ids) : r.ids);
  const BleuReward reward(ref_ids, spec);
  return generator_pg_step(gen, reward, len, cfg, stream_id);
}

PgStepResult binary_pg_step(GeneratorModel& gen, const Discriminator& disc, const PgConfig& cfg,
                            std::uint64_t stream_id) {
  const DiscriminatorReward reward(disc);
  return generator_pg_step(gen, reward, disc.fixed_len(), cfg, stream_id);
}

// ---- ranker --------------------------------------------------------------------

namespace {

struct RankerTerms {
  Var human, synthetic;
};

RankerTerms ranker_terms(Tape& tape, const EncoderVars& vars, const RankerModel& ranker,
                         std::span<const TokenSeq> human, std::span<const TokenSeq> synthetic,
                         const ReferenceSet& refs, const ComparisonSet& comps_minus,
                         const ComparisonSet& comps_plus) {
  if (human.empty() || synthetic.empty()) throw UsageError("ranker step needs both batches");
  if (refs.sentences.empty()) throw UsageError("ranker step needs a nonempty reference set");
  const std::size_t len = ranker.fixed_len();
  const auto h = flatten(human, len);
  const auto s = flatten(synthetic, len);
  const auto u = flatten(refs.sentences, len);
  const auto cm = flatten(comps_minus.sentences, len);
  const auto cp = flatten(comps_plus.sentences, len);
  Var lh = log_expected_rank(tape, vars, ranker, h, human.size(), u, refs.sentences.size(), cm,
                             comps_minus.sentences.size());
  Var ls = log_expected_rank(tape, vars, ranker, s, synthetic.size(), u, refs.sentences.size(), cp,
                             comps_plus.sentences.size());
  return {ops::mean(lh), ops::mean(ls)};
}

}  // namespace

RankerObjective ranker_objective(const RankerModel& ranker, std::span<const TokenSeq> human,
                                 std::span<const TokenSeq> synthetic, const ReferenceSet& refs,
                                 const ComparisonSet& comps_minus,
                                 const ComparisonSet& comps_plus) {
  Tape tape;
  EncoderVars vars = EncoderVars::on(tape, ranker.encoder(), false);
  RankerTerms t = ranker_terms(tape, vars, ranker, human, synthetic, refs, comps_minus, comps_plus);
  return {t.human.value().item(), t.synthetic.value().item()};
}

double ranker_step(RankerModel& ranker, std::span<const TokenSeq> human,
                   std::span<const TokenSeq> synthetic, const ReferenceSet& refs,
                   const ComparisonSet& comps_minus, const ComparisonSet& comps_plus,
                   const SgdConfig& cfg) {
  Tape tape;
  EncoderVars vars = EncoderVars::on(tape, ranker.encoder(), true);
  RankerTerms t = ranker_terms(tape, vars, ranker, human, synthetic, refs, comps_minus, comps_plus);
  Var loss = ops::sub(t.synthetic, t.human);
  const double value = loss.value().item();
  if (!std::isfinite(value)) throw TrainingAborted("non-finite ranker loss");
  Gradients grads = tape.backward(loss);
  auto params = ranker.parameters();
  apply_sgd(params, grads, cfg);
  if (cfg.learning_rate != 0.0) ranker.bump_version();
  return value;
}

// ---- Trainer -------------------------------------------------------------------

Trainer::Trainer(TrainingConfig cfg, Corpus train, std::optional<Oracle> oracle)
    : cfg_(std::move(cfg)), train_(std::move(train)), oracle_(std::move(oracle)) {
  cfg_.validate();
  if (train_.seqs.empty()) throw UsageError("training corpus is empty");
  if (!train_.vocab) throw UsageError("training corpus has no vocabulary");
  if (train_.fixed_len != cfg_.fixed_len) {
    throw UsageError("corpus length " + std::to_string(train_.fixed_len) +
                     " differs from configured fixed_len " + std::to_string(cfg_.fixed_len));
  }
  const std::size_t vocab = train_.vocab->size();
  if (oracle_ && oracle_->vocab_size() != vocab) {
    throw UsageError("oracle vocabulary size " + std::to_string(oracle_->vocab_size()) +
                     " differs from corpus vocabulary size " + std::to_string(vocab));
  }
  const std::uint64_t seed = cfg_.master_seed;
  gen_ = GeneratorModel::init_uniform({vocab, cfg_.embed_dim, cfg_.hidden_dim},
                                      derive_seed(seed, Stream::kInit, {1}));
  EncoderConfig enc;
  enc.vocab = vocab;
  enc.embed = cfg_.ranker_embed_dim;
  enc.widths = cfg_.ranker_widths;
  enc.filters_per_width = cfg_.ranker_filters;
  if (cfg_.mode == Mode::kRankGan) {
    ranker_ = RankerModel(CnnEncoder::init_uniform(enc, derive_seed(seed, Stream::kInit, {2})),
                          cfg_.gamma, cfg_.fixed_len);
  } else if (cfg_.mode == Mode::kBinary) {
    disc_ = Discriminator::init_uniform(enc, cfg_.fixed_len, derive_seed(seed, Stream::kInit, {3}));
  }
}

std::vector<TokenSeq> Trainer::draw_human(std::size_t count, Stream purpose,
                                          std::initializer_list<std::uint64_t> coords) const {
  Rng rng = make_rng(cfg_.master_seed, purpose, coords);
  std::vector<TokenSeq> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(train_.seqs[uniform_index(rng, train_.seqs.size())]);
  return out;
}

std::vector<TokenSeq> Trainer::draw_generated(std::size_t count, Stream purpose,
                                              std::initializer_list<std::uint64_t> coords) const {
  const std::uint64_t base = derive_seed(cfg_.master_seed, purpose, coords);
  std::vector<Rng> rngs;
  rngs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) rngs.push_back(make_rng(base, Stream::kSample, {i}));
  const auto ids = sample_rows(gen_, cfg_.fixed_len, rngs);
  std::vector<TokenSeq> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto first = ids.begin() + static_cast<std::ptrdiff_t>(i * cfg_.fixed_len);
    out[i].ids.assign(first, first + static_cast<std::ptrdiff_t>(cfg_.fixed_len));
    out[i].length = cfg_.fixed_len;
  }
  return out;
}

void Trainer::evaluate(std::size_t, EpochRecord& rec) const {
  if (!oracle_ || cfg_.eval_samples == 0) return;
  // One evaluation stream for every epoch: successive epochs (and modes
  // sharing a seed) are compared on common random numbers.
  const NllEstimate e = oracle_nll(*oracle_, gen_, cfg_.eval_samples, cfg_.fixed_len,
                                   derive_seed(cfg_.master_seed, Stream::kEval));
  rec.oracle_nll = e.mean;
  rec.oracle_nll_per_token = e.per_token;
}

void Trainer::mle_epoch(std::size_t epoch, EpochRecord& rec) {
  std::vector<std::size_t> order(train_.seqs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = make_rng(cfg_.master_seed, Stream::kShuffle, {epoch});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  const SgdConfig sgd{cfg_.lr_mle, cfg_.clip_norm};
  double total = 0.0;
  std::size_t batches = 0;
  std::vector<TokenSeq> batch;
  for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(train_.seqs[order[i]]);
    total += mle_step(gen_, batch, sgd);
    ++batches;
  }
  rec.generator_loss = total / static_cast<double>(batches);
}

double Trainer::critic_step(std::size_t epoch, std::size_t step) {
  const std::size_t b = cfg_.batch_size;
  const auto human = draw_human(b, Stream::kRankerBatch, {epoch, step, 0});
  const auto synthetic = draw_generated(b, Stream::kRankerBatch, {epoch, step, 1});
  const SgdConfig sgd{cfg_.lr_ranker, cfg_.clip_norm};
  if (cfg_.mode == Mode::kBinary) return discriminator_step(disc_, human, synthetic, sgd);

  ReferenceSet refs{draw_human(cfg_.ref_size, Stream::kReferences, {epoch, step, 1})};
  ComparisonSet minus{draw_generated(cfg_.comparison_size, Stream::kComparison, {epoch, step, 1}),
                      Polarity::kMinus};
  ComparisonSet plus{draw_human(cfg_.comparison_size, Stream::kComparison, {epoch, step, 2}),
                     Polarity::kPlus};
  return ranker_step(ranker_, human, synthetic, refs, minus, plus, sgd);
}

void Trainer::adversarial_round(std::size_t epoch, EpochRecord& rec) {
  const bool has_critic = cfg_.mode == Mode::kRankGan || cfg_.mode == Mode::kBinary;
  if (has_critic && epoch == cfg_.pretrain_epochs + 1) {
    for (std::size_t k = 0; k < cfg_.critic_pretrain_steps; ++k)
      critic_step(epoch, kWarmupStep + k);
  }

  PgConfig pg;
  pg.batch_size = cfg_.batch_size;
  pg.rollout = {cfg_.rollout_n, cfg_.master_seed};
  pg.sgd = {cfg_.lr_generator, cfg_.clip_norm};
  BleuSpec bleu;
  bleu.max_n = cfg_.bleu_order;
  bleu.strip_special = train_.vocab->has_reserved();

  double reward_total = 0.0;
  for (std::size_t g = 0; g < cfg_.g_steps; ++g) {
    const std::uint64_t stream_id = (static_cast<std::uint64_t>(epoch) << 20) | g;
    std::unique_ptr<SequenceReward> reward;
    if (cfg_.mode == Mode::kRankGan) {
      ReferenceSet refs{draw_human(cfg_.ref_size, Stream::kReferences, {epoch, g, 0})};
      ComparisonSet plus{draw_human(cfg_.comparison_size, Stream::kComparison, {epoch, g, 0}),
                         Polarity::kPlus};
      reward = std::make_unique<RankReward>(ranker_, refs, plus);
    } else if (cfg_.mode == Mode::kBinary) {
      reward = std::make_unique<DiscriminatorReward>(disc_);
    } else {
      std::vector<std::vector<int>> refs;
      for (const TokenSeq& r : draw_human(cfg_.bleu_refs, Stream::kReferences, {epoch, g, 0}))
        refs.push_back(bleu.strip_special ? strip_special(r.ids) : r.ids);
      reward = std::make_unique<BleuReward>(refs, bleu);
    }

    std::vector<int> ids =
        sample_batch(gen_, pg.batch_size, cfg_.fixed_len, cfg_.master_seed, stream_id);
    std::vector<double> values =
        rollout_values(gen_, *reward, ids, pg.batch_size, cfg_.fixed_len, pg.rollout, stream_id);
    double batch_mean = 0.0;
    for (std::size_t b = 0; b < pg.batch_size; ++b)
      batch_mean += values[b * cfg_.fixed_len + cfg_.fixed_len - 1];
    batch_mean /= static_cast<double>(pg.batch_size);
    if (cfg_.reward_baseline && !baseline_ready_) {
      baseline_ = batch_mean;
      baseline_ready_ = true;
    }
    const double baseline = cfg_.reward_baseline ? baseline_ : 0.0;
    const PgStepResult r = finish_pg_step(gen_, std::move(ids), std::move(values), pg.batch_size,
                                          cfg_.fixed_len, pg, baseline);
    if (cfg_.reward_baseline) {
      baseline_ = cfg_.baseline_decay * baseline_ + (1.0 - cfg_.baseline_decay) * r.mean_reward;
    }
    reward_total += r.mean_reward;
  }
  if (cfg_.g_steps > 0) rec.mean_reward = reward_total / static_cast<double>(cfg_.g_steps);

  if (has_critic && cfg_.r_steps > 0) {
    double total = 0.0;
    for (std::size_t r = 0; r < cfg_.r_steps; ++r) total += critic_step(epoch, r);
    rec.critic_loss = total / static_cast<double>(cfg_.r_steps);
  }
}

EpochRecord Trainer::run_epoch(std::size_t epoch) {
  const auto start = std::chrono::steady_clock::now();
  EpochRecord rec;
  rec.epoch = epoch;
  if (epoch == 0) {
    rec.phase = "init";
  } else if (epoch <= cfg_.pretrain_epochs) {
    rec.phase = "pretrain";
    mle_epoch(epoch, rec);
  } else {
    rec.phase = "adversarial";
    adversarial_round(epoch, rec);
  }
  if (!gen_.is_finite()) throw TrainingAborted("generator parameters became non-finite");
  evaluate(epoch, rec);
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::size_t Trainer::run(std::size_t max_epochs,
                         const std::function<void(const Trainer&)>& on_epoch) {
  std::size_t done = 0;
  while (!finished() && done < max_epochs) {
    log_.records.push_back(run_epoch(next_epoch_));
    ++next_epoch_;
    ++done;
    if (on_epoch) on_epoch(*this);
  }
  return done;
}

void Trainer::adopt_pretraining(const Trainer& pretrained) {
  const TrainingConfig& o = pretrained.cfg_;
  const bool same_phase =
      o.master_seed == cfg_.master_seed && o.pretrain_epochs == cfg_.pretrain_epochs &&
      o.batch_size == cfg_.batch_size && o.lr_mle == cfg_.lr_mle &&
      o.clip_norm == cfg_.clip_norm && o.fixed_len == cfg_.fixed_len &&
      o.embed_dim == cfg_.embed_dim && o.hidden_dim == cfg_.hidden_dim &&
      o.eval_samples == cfg_.eval_samples;
  if (!same_phase) throw UsageError("pretraining settings differ between the two trainers");
  if (pretrained.train_.seqs != train_.seqs) throw UsageError("pretraining used a different corpus");
  if (pretrained.oracle_.has_value() != oracle_.has_value() ||
      (oracle_ && !(pretrained.oracle_->model() == oracle_->model()))) {
    throw UsageError("pretraining was evaluated against a different oracle");
  }
  if (next_epoch_ != 0 || pretrained.next_epoch_ != cfg_.pretrain_epochs + 1) {
    throw UsageError("adopt_pretraining needs a fresh trainer and a finished MLE phase");
  }
  gen_ = pretrained.gen_;
  log_ = pretrained.log_;
  next_epoch_ = pretrained.next_epoch_;
}

void Trainer::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  gen_.to_checkpoint().save(dir / "generator.ckpt");
  if (cfg_.mode == Mode::kRankGan) ranker_.to_checkpoint().save(dir / "ranker.ckpt");
  if (cfg_.mode == Mode::kBinary) disc_.to_checkpoint().save(dir / "discriminator.ckpt");
  {
    std::ofstream out(dir / "trainer_state.txt", std::ios::binary);
    out << "next_epoch=" << next_epoch_ << "\n";
    out << "ranker_version=" << ranker_.version() << "\n";
    out << "baseline_ready=" << (baseline_ready_ ? 1 : 0) << "\n";
    out << "baseline_bits=" << hex64(std::bit_cast<std::uint64_t>(baseline_)) << "\n";
    if (!out) throw FormatError("cannot write " + (dir / "trainer_state.txt").string());
  }
  std::ofstream log_out(dir / "runlog.csv", std::ios::binary);
  log_out << log_.to_csv();
  std::ofstream timing_out(dir / "timing.csv", std::ios::binary);
  timing_out << log_.timing_csv();
  if (!log_out || !timing_out) throw FormatError("cannot write run log in " + dir.string());
}

void Trainer::restore(const std::filesystem::path& dir) {
  std::ifstream in(dir / "trainer_state.txt");
  if (!in) throw FormatError("missing trainer state in " + dir.string());
  std::string line;
  std::size_t next = 0;
  std::uint64_t version = 0, bits = 0;
  bool ready = false;
  int seen = 0;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "next_epoch") next = std::stoull(value), ++seen;
    else if (key == "ranker_version") version = std::stoull(value), ++seen;
    else if (key == "baseline_ready") ready = value == "1", ++seen;
    else if (key == "baseline_bits") bits = std::stoull(value, nullptr, 16), ++seen;
  }
  if (seen != 4) throw FormatError("incomplete trainer state in " + dir.string());

  GeneratorModel gen = GeneratorModel::from_checkpoint(Checkpoint::load(dir / "generator.ckpt", "generator"));
  if (gen.dims().vocab != gen_.dims().vocab || gen.dims().embed != gen_.dims().embed ||
      gen.dims().hidden != gen_.dims().hidden) {
    throw FormatError("saved generator dimensions differ from the configuration");
  }
  gen_ = std::move(gen);
  if (cfg_.mode == Mode::kRankGan) {
    ranker_ = RankerModel::from_checkpoint(Checkpoint::load(dir / "ranker.ckpt", "ranker"));
    for (std::uint64_t v = 0; v < version; ++v) ranker_.bump_version();
  }
  if (cfg_.mode == Mode::kBinary) {
    disc_ = Discriminator::from_checkpoint(
        Checkpoint::load(dir / "discriminator.ckpt", "discriminator"));
  }
  std::ifstream log_in(dir / "runlog.csv", std::ios::binary);
  std::stringstream text;
  text << log_in.rdbuf();
  log_ = RunLog::from_csv(text.str());
  if (log_.records.size() != next) throw FormatError("run log length disagrees with trainer state");
  std::ifstream timing_in(dir / "timing.csv");
  std::getline(timing_in, line);
  for (EpochRecord& r : log_.records) {
    if (!std::getline(timing_in, line)) break;
    const auto comma = line.find(',');
    if (comma != std::string::npos) r.wall_seconds = std::atof(line.c_str() + comma + 1);
  }
  next_epoch_ = next;
  baseline_ready_ = ready;
  baseline_ = std::bit_cast<double>(bits);
}

RunLog train(const TrainingConfig& cfg, const Corpus& corpus, std::optional<Oracle> oracle) {
  Trainer t(cfg, corpus, std::move(oracle));
  t.run();
  return t.log();
}

}  // namespace rankgan
