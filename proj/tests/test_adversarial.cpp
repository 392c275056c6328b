#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "pg_toy.hpp"
#include "rankgan/adversarial.hpp"
#include "rankgan/checkpoint.hpp"
#include "rankgan/discriminator.hpp"
#include "rankgan/error.hpp"
#include "rankgan/metrics.hpp"
#include "rankgan/oracle.hpp"
#include "rankgan/parallel.hpp"
#include "support.hpp"

using namespace rankgan;
using namespace rankgan::testing;

namespace {

EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.vocab = 6;
  cfg.embed = 4;
  cfg.widths = {2, 3};
  cfg.filters_per_width = 3;
  return cfg;
}

std::vector<TokenSeq> sequences_over(Rng& rng, std::size_t count, int lo, int hi) {
  std::vector<TokenSeq> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<int> ids(5);
    for (int& t : ids) t = lo + static_cast<int>(random_dim(rng, 0, static_cast<std::size_t>(hi - lo)));
    out.push_back(seq(ids));
  }
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

TrainingConfig tiny_config(Mode mode) {
  TrainingConfig cfg;
  cfg.mode = mode;
  cfg.master_seed = 7;
  cfg.pretrain_epochs = 2;
  cfg.adversarial_rounds = 3;
  cfg.critic_pretrain_steps = 2;
  cfg.batch_size = 4;
  cfg.rollout_n = 2;
  cfg.ref_size = 2;
  cfg.comparison_size = 2;
  cfg.fixed_len = 5;
  cfg.embed_dim = 4;
  cfg.hidden_dim = 5;
  cfg.ranker_embed_dim = 4;
  cfg.ranker_widths = {2};
  cfg.ranker_filters = 3;
  cfg.bleu_refs = 4;
  cfg.eval_samples = 20;
  cfg.lr_mle = 0.5;
  cfg.lr_generator = 0.1;
  return cfg;
}

Corpus tiny_corpus() {
  const Oracle o = make_oracle(3, {6, 4, 5});
  return generate_synthetic(o, 24, 5, 1);
}

Oracle tiny_oracle() { return make_oracle(3, {6, 4, 5}); }

}  // namespace

TEST_CASE("the policy-gradient estimate is unbiased on a two-step toy") {
  const GeneratorModel gen = toy_generator();
  const auto exact = exact_pg_gradient(gen);
  const PgEstimate est = estimate_pg_gradient(gen, 20000, 100, 4, 5);
  REQUIRE(est.mean.size() == exact.size());
  for (std::size_t i = 0; i < exact.size(); ++i) {
    INFO("coordinate " << i);
    CHECK(std::abs(est.mean[i] - exact[i]) <= 3.0 * est.std_error[i] + 1e-12);
  }
}

TEST_CASE("surrogate-loss gradients are linear in the weights") {
  const GeneratorModel gen = GeneratorModel::init_uniform({4, 3, 3}, 2, 0.5);
  const std::vector<int> ids = {0, 1, 3, 2, 2, 1};
  const std::vector<double> w1 = {0.3, -0.2, 0.5, 1.0, 0.1, -0.4};
  const std::vector<double> w2 = {0.6, 0.2, -0.1, 0.0, 0.3, 0.2};
  std::vector<double> w12(6);
  for (std::size_t i = 0; i < 6; ++i) w12[i] = 2.0 * w1[i] + w2[i];
  const Gradients g1 = pg_loss_gradients(gen, ids, 2, 3, w1);
  const Gradients g2 = pg_loss_gradients(gen, ids, 2, 3, w2);
  const Gradients g12 = pg_loss_gradients(gen, ids, 2, 3, w12);
  for (const Tensor* t : gen.parameters())
    for (std::size_t i = 0; i < t->size(); ++i)
      CHECK(g12.of(*t)[i] == doctest::Approx(2.0 * g1.of(*t)[i] + g2.of(*t)[i]).epsilon(1e-12));
  CHECK_THROWS_AS(pg_loss_gradients(gen, ids, 2, 3, std::vector<double>(5)), UsageError);
}

TEST_CASE("a zero learning rate leaves the generator and the ranker untouched") {
  GeneratorModel gen = GeneratorModel::init_uniform({6, 4, 5}, 2, 0.3);
  const GeneratorModel gen_before = gen;
  const FunctionReward reward([](std::span<const int> ids) { return ids[0] == 1 ? 1.0 : 0.0; });
  PgConfig pg;
  pg.batch_size = 3;
  pg.rollout = {2, 1};
  pg.sgd = {0.0, 5.0};
  generator_pg_step(gen, reward, 5, pg, 0);
  CHECK(gen == gen_before);

  RankerModel ranker(CnnEncoder::init_uniform(tiny_encoder(), 4, 0.5), 4.0, 5);
  const RankerModel ranker_before = ranker;
  Rng rng(1);
  const auto human = sequences_over(rng, 4, 0, 5), synthetic = sequences_over(rng, 4, 0, 5);
  ranker_step(ranker, human, synthetic, {sequences_over(rng, 2, 0, 5)},
              {sequences_over(rng, 2, 0, 5), Polarity::kMinus},
              {sequences_over(rng, 2, 0, 5), Polarity::kPlus}, {0.0, 5.0});
  CHECK(ranker == ranker_before);
  CHECK(ranker.version() == ranker_before.version());
}

TEST_CASE("a policy-gradient step raises the probability of rewarded sequences") {
  GeneratorModel gen = GeneratorModel::init_uniform({6, 4, 5}, 2, 0.3);
  const FunctionReward reward([](std::span<const int> ids) {
    double r = 0.0;
    for (int t : ids) r += t == 4 ? 0.2 : 0.0;
    return r;
  });
  const double before = exact_value(gen, reward, {}, 2);
  PgConfig pg;
  pg.batch_size = 32;
  pg.rollout = {4, 1};
  pg.sgd = {0.5, 5.0};
  for (std::uint64_t s = 0; s < 30; ++s) generator_pg_step(gen, reward, 2, pg, s);
  CHECK(exact_value(gen, reward, {}, 2) > before + 0.05);
}

TEST_CASE("ranker step reports the negated objective and the objective is antisymmetric") {
  RankerModel ranker(CnnEncoder::init_uniform(tiny_encoder(), 4, 0.5), 4.0, 5);
  Rng rng(2);
  const auto human = sequences_over(rng, 4, 0, 5), synthetic = sequences_over(rng, 4, 0, 5);
  const ReferenceSet refs{sequences_over(rng, 2, 0, 5)};
  const auto cset = sequences_over(rng, 2, 0, 5);
  const ComparisonSet minus{cset, Polarity::kMinus}, plus{cset, Polarity::kPlus};
  const RankerObjective obj = ranker_objective(ranker, human, synthetic, refs, minus, plus);
  // Swapping the roles of the two batches (same comparison sentences) negates the objective.
  const RankerObjective swapped = ranker_objective(ranker, synthetic, human, refs, minus, plus);
  CHECK(swapped.objective() == doctest::Approx(-obj.objective()).epsilon(1e-12));

  double human_term = 0.0;
  for (const TokenSeq& h : human) human_term += std::log(expected_rank(h, refs, minus, ranker));
  CHECK(obj.human_term == doctest::Approx(human_term / 4.0).epsilon(1e-12));

  const double loss = ranker_step(ranker, human, synthetic, refs, minus, plus, {0.05, 5.0});
  CHECK(loss == doctest::Approx(-obj.objective()).epsilon(1e-12));
  CHECK(ranker.version() == 1);
}

TEST_CASE("the ranker learns to rank separable human sentences above generated ones") {
  RankerModel ranker(CnnEncoder::init_uniform(tiny_encoder(), 4, 0.5), 4.0, 5);
  Rng rng(3);
  const auto human = sequences_over(rng, 8, 0, 2), synthetic = sequences_over(rng, 8, 3, 5);
  const ReferenceSet refs{sequences_over(rng, 2, 0, 2)};
  const ComparisonSet minus{sequences_over(rng, 2, 3, 5), Polarity::kMinus};
  const ComparisonSet plus{sequences_over(rng, 2, 0, 2), Polarity::kPlus};
  const double start = ranker_objective(ranker, human, synthetic, refs, minus, plus).objective();
  for (int step = 0; step < 200; ++step) ranker_step(ranker, human, synthetic, refs, minus, plus, {0.2, 5.0});
  const RankerObjective end = ranker_objective(ranker, human, synthetic, refs, minus, plus);
  CHECK(end.objective() > start + 1.0);
}

TEST_CASE("a discriminator with zero weights is undecided") {
  Discriminator d = Discriminator::init_uniform(tiny_encoder(), 5, 1, 0.5);
  for (Tensor* t : d.parameters())
    for (double& v : t->data()) v = 0.0;
  Rng rng(4);
  // All-zero filters give zero features, so only the classifier bias matters.
  const auto ids = flatten(sequences_over(rng, 3, 0, 5), 5);
  for (double p : d.prob_real(ids, 3)) CHECK(p == 0.5);
}

TEST_CASE("the discriminator separates a separable toy") {
  Discriminator d = Discriminator::init_uniform(tiny_encoder(), 5, 1, 0.5);
  Rng rng(5);
  const auto human = sequences_over(rng, 16, 0, 2), synthetic = sequences_over(rng, 16, 3, 5);
  double loss = 0.0;
  for (int step = 0; step < 400; ++step) loss = discriminator_step(d, human, synthetic, {0.5, 5.0});
  CHECK(loss < 0.1);
  const Discriminator frozen = d;
  discriminator_step(d, human, synthetic, {0.0, 5.0});
  CHECK(d == frozen);
}

TEST_CASE("the PG-BLEU reward of a complete sequence is its sentence BLEU") {
  GeneratorModel gen = GeneratorModel::init_uniform({6, 4, 5}, 2, 0.3);
  Rng rng(6);
  const auto refs = sequences_over(rng, 5, 0, 5);
  BleuSpec spec;
  spec.strip_special = false;
  PgConfig pg;
  pg.batch_size = 4;
  pg.rollout = {2, 3};
  pg.sgd = {0.0, 5.0};
  const PgStepResult r = pg_bleu_step(gen, refs, spec, 5, pg, 0);
  double mean = 0.0;
  for (std::size_t b = 0; b < 4; ++b) {
    const TokenSeq s = seq({r.sequences.begin() + static_cast<std::ptrdiff_t>(b * 5),
                            r.sequences.begin() + static_cast<std::ptrdiff_t>(b * 5 + 5)});
    const double expected = bleu(s, refs, spec);
    CHECK(r.values[b * 5 + 4] == doctest::Approx(expected).epsilon(1e-15));
    mean += expected / 4.0;
  }
  CHECK(r.mean_reward == doctest::Approx(mean).epsilon(1e-15));
}

TEST_CASE("training is deterministic and independent of the thread count") {
  for (Mode mode : {Mode::kRankGan, Mode::kBinary, Mode::kPgBleu}) {
    INFO(mode_name(mode));
    set_thread_count(1);
    Trainer a(tiny_config(mode), tiny_corpus(), tiny_oracle());
    a.run();
    set_thread_count(3);
    Trainer b(tiny_config(mode), tiny_corpus(), tiny_oracle());
    b.run();
    set_thread_count(1);
    CHECK(a.log().to_csv() == b.log().to_csv());
    CHECK(a.generator() == b.generator());
    CHECK(a.ranker() == b.ranker());
    CHECK(a.discriminator() == b.discriminator());
    CHECK(a.log().records.size() == tiny_config(mode).total_epochs());
  }
}

TEST_CASE("a run with zero adversarial rounds is the MLE baseline") {
  TrainingConfig cfg = tiny_config(Mode::kRankGan);
  cfg.adversarial_rounds = 0;
  const RunLog zero = train(cfg, tiny_corpus(), tiny_oracle());
  cfg.mode = Mode::kMleOnly;
  cfg.adversarial_rounds = 3;
  const RunLog mle = train(cfg, tiny_corpus(), tiny_oracle());
  CHECK(zero.to_csv() == mle.to_csv());
  CHECK(mle.records.size() == 3);
  CHECK(mle.records.front().phase == "init");
  CHECK(mle.records.back().phase == "pretrain");
}

TEST_CASE("adopting a finished MLE phase continues exactly like a full run") {
  for (Mode mode : {Mode::kRankGan, Mode::kBinary}) {
    Trainer full(tiny_config(mode), tiny_corpus(), tiny_oracle());
    full.run();
    Trainer pre(tiny_config(Mode::kMleOnly), tiny_corpus(), tiny_oracle());
    pre.run();
    Trainer adopted(tiny_config(mode), tiny_corpus(), tiny_oracle());
    adopted.adopt_pretraining(pre);
    adopted.run();
    CHECK(adopted.log().to_csv() == full.log().to_csv());
    CHECK(adopted.generator() == full.generator());
  }
  Trainer unfinished(tiny_config(Mode::kMleOnly), tiny_corpus(), tiny_oracle());
  unfinished.run(1);
  Trainer target(tiny_config(Mode::kRankGan), tiny_corpus(), tiny_oracle());
  CHECK_THROWS_AS(target.adopt_pretraining(unfinished), UsageError);
  TrainingConfig other = tiny_config(Mode::kMleOnly);
  other.lr_mle = 0.25;
  Trainer different(other, tiny_corpus(), tiny_oracle());
  different.run();
  CHECK_THROWS_AS(target.adopt_pretraining(different), UsageError);
}

TEST_CASE("a run resumed from any epoch boundary matches the uninterrupted run") {
  for (Mode mode : {Mode::kRankGan, Mode::kBinary}) {
    TrainingConfig cfg = tiny_config(mode);
    cfg.reward_baseline = true;
    Trainer full(cfg, tiny_corpus(), tiny_oracle());
    full.run();
    const auto dir = scratch_dir("resume_" + mode_name(mode));
    for (std::size_t stop : {1u, 3u, 4u}) {
      Trainer first(cfg, tiny_corpus(), tiny_oracle());
      first.run(stop);
      first.save(dir);
      Trainer second(cfg, tiny_corpus(), tiny_oracle());
      second.restore(dir);
      second.run();
      second.save(dir);
      CHECK(second.log().to_csv() == full.log().to_csv());
      CHECK(second.generator() == full.generator());
      CHECK(second.ranker() == full.ranker());
      CHECK(second.discriminator() == full.discriminator());
      const auto bytes = full.generator().to_checkpoint().serialize();
      CHECK(read_file(dir / "generator.ckpt") == std::string(bytes.begin(), bytes.end()));
    }
  }
}

TEST_CASE("run logs round-trip through CSV") {
  Trainer t(tiny_config(Mode::kRankGan), tiny_corpus(), tiny_oracle());
  t.run();
  const std::string csv = t.log().to_csv();
  CHECK(RunLog::from_csv(csv).to_csv() == csv);
  CHECK(csv.rfind(RunLog::csv_header(), 0) == 0);
  CHECK_THROWS_AS(RunLog::from_csv("epoch,phase\n"), FormatError);
}

TEST_CASE("trainer configuration errors") {
  TrainingConfig cfg = tiny_config(Mode::kRankGan);
  cfg.ref_size = 0;
  CHECK_THROWS_AS(Trainer(cfg, tiny_corpus(), tiny_oracle()), ConfigError);
  cfg = tiny_config(Mode::kRankGan);
  cfg.fixed_len = 6;
  CHECK_THROWS_AS(Trainer(cfg, tiny_corpus(), tiny_oracle()), UsageError);
  cfg = tiny_config(Mode::kRankGan);
  CHECK_THROWS_AS(Trainer(cfg, tiny_corpus(), make_oracle(3, {7, 4, 5})), UsageError);
  CHECK_THROWS_AS(parse_mode("seqgan"), ConfigError);
  CHECK(parse_mode("pg_bleu") == Mode::kPgBleu);
}
