#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "rankgan/checkpoint.hpp"
#include "rankgan/error.hpp"
#include "rankgan/generator.hpp"
#include "support.hpp"

using namespace rankgan;
using namespace rankgan::testing;

namespace {

GeneratorModel small_model(std::uint64_t seed = 3, double scale = 0.5) {
  return GeneratorModel::init_uniform({7, 4, 5}, seed, scale);
}

std::vector<TokenSeq> random_batch(Rng& rng, std::size_t count, std::size_t len, std::size_t vocab) {
  std::vector<TokenSeq> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<int> ids(len);
    for (int& t : ids) t = static_cast<int>(random_dim(rng, 0, vocab - 1));
    out.push_back(seq(ids));
  }
  return out;
}

}  // namespace

TEST_CASE("initialisation is a pure function of the seed") {
  CHECK(small_model(3) == small_model(3));
  CHECK_FALSE(small_model(3) == small_model(4));
  CHECK(small_model(3).is_finite());
  CHECK_THROWS_AS(GeneratorModel({0, 4, 5}), DimensionError);
}

TEST_CASE("next-token distributions are normalised") {
  const GeneratorModel m = small_model();
  LstmState s = initial_state(m);
  int token = kBos;
  for (int t = 0; t < 6; ++t) {
    auto [probs, next] = step(m, token, s);
    CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (double p : probs) CHECK(p > 0.0);
    s = next;
    token = t % 7;
  }
  CHECK_THROWS_AS(step(m, 7, s), UsageError);
  CHECK_THROWS_AS(step(m, -1, s), UsageError);
}

TEST_CASE("batched steps equal single-row steps bit for bit") {
  const GeneratorModel m = small_model();
  const std::vector<int> tokens = {1, 4, 0, 6};
  LstmBatch batch = LstmBatch::zeros(4, 5);
  std::vector<double> out(4 * 7);
  step_batch(m, tokens, batch, out);
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    auto [probs, s] = step(m, tokens[r], initial_state(m));
    for (std::size_t v = 0; v < 7; ++v) CHECK(out[r * 7 + v] == probs[v]);
    for (std::size_t j = 0; j < 5; ++j) CHECK(batch.h[r * 5 + j] == s.h[j]);
  }
}

TEST_CASE("nll is the negated sum of step log-probabilities") {
  const GeneratorModel m = small_model();
  const std::vector<int> ids = {3, 0, 6, 6, 2};
  double expected = 0.0;
  LstmState s = initial_state(m);
  int token = kBos;
  for (int w : ids) {
    auto [probs, next] = step(m, token, s);
    expected -= std::log(probs[static_cast<std::size_t>(w)]);
    s = next;
    token = w;
  }
  CHECK(nll(m, ids) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("the differentiable sequence log-likelihood matches the inference path") {
  const GeneratorModel m = small_model();
  Rng rng(8);
  const auto batch = random_batch(rng, 3, 6, 7);
  const auto ids = flatten(batch, 6);
  Tape tape;
  Var lp = sequence_log_probs(tape, GeneratorVars::on(tape, m, false), ids, 3, 6);
  const auto direct = nll_rows(m, ids, 3, 6);
  for (std::size_t b = 0; b < 3; ++b) {
    double row = 0.0;
    for (std::size_t t = 0; t < 6; ++t) row -= lp.value()[b * 6 + t];
    CHECK(row == doctest::Approx(direct[b]).epsilon(1e-12));
  }
}

TEST_CASE("mle_step with a zero learning rate leaves parameters bit-identical") {
  GeneratorModel m = small_model();
  const GeneratorModel before = m;
  Rng rng(1);
  const auto batch = random_batch(rng, 4, 5, 7);
  mle_step(m, batch, {0.0, 5.0});
  CHECK(m == before);
}

TEST_CASE("mle_step reports the mean per-token NLL of the batch") {
  GeneratorModel m = small_model();
  Rng rng(2);
  const auto batch = random_batch(rng, 4, 5, 7);
  double total = 0.0;
  for (const TokenSeq& s : batch) total += nll(m, s);
  const double loss = mle_step(m, batch, {0.1, 5.0});
  CHECK(loss == doctest::Approx(total / (4.0 * 5.0)).epsilon(1e-12));
  CHECK_THROWS_AS(mle_step(m, std::vector<TokenSeq>{}, {0.1, 5.0}), UsageError);
}

TEST_CASE("MLE loss on a fixed batch does not increase with a small learning rate") {
  GeneratorModel m = small_model(5, 0.3);
  Rng rng(3);
  const auto batch = random_batch(rng, 8, 6, 7);
  double prev = std::numeric_limits<double>::infinity();
  int violations = 0;
  for (int step = 0; step < 100; ++step) {
    const double loss = mle_step(m, batch, {0.05, 5.0});
    if (loss > prev + 1e-12) ++violations;
    prev = loss;
  }
  CHECK(violations <= 5);
  GeneratorModel fresh = small_model(5, 0.3);
  CHECK(prev < mle_step(fresh, batch, {0.0, 5.0}));
}

TEST_CASE("gradient clipping caps the update at learning_rate * clip_norm") {
  GeneratorModel m = small_model();
  const GeneratorModel before = m;
  Rng rng(4);
  const auto batch = random_batch(rng, 4, 5, 7);
  // A clip far below the natural norm: the applied step has norm lr * clip.
  mle_step(m, batch, {1.0, 1e-3});
  double sq = 0.0;
  const auto a = m.parameters();
  const auto b = before.parameters();
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k]->size(); ++i) sq += std::pow((*a[k])[i] - (*b[k])[i], 2);
  CHECK(std::sqrt(sq) == doctest::Approx(1e-3).epsilon(1e-9));
}

TEST_CASE("a non-finite gradient aborts training") {
  GeneratorModel m = small_model();
  m.w_out[0] = std::numeric_limits<double>::quiet_NaN();
  Rng rng(5);
  const auto batch = random_batch(rng, 2, 3, 7);
  CHECK_THROWS_AS(mle_step(m, batch, {0.1, 5.0}), TrainingAborted);
}

TEST_CASE("sampling is seeded and independent of batch composition") {
  const GeneratorModel m = small_model();
  std::vector<Rng> rngs;
  for (std::uint64_t i = 0; i < 5; ++i) rngs.push_back(make_rng(77, Stream::kSample, {i}));
  const auto rows = sample_rows(m, 8, rngs);
  for (std::uint64_t i = 0; i < 5; ++i) {
    Rng rng = make_rng(77, Stream::kSample, {i});
    const TokenSeq s = sample(m, 8, rng);
    CHECK(std::equal(s.ids.begin(), s.ids.end(), rows.begin() + static_cast<std::ptrdiff_t>(i * 8)));
  }
  for (int t : rows) CHECK((t >= 0 && t < 7));
  Rng again = make_rng(77, Stream::kSample, {0});
  Rng other = make_rng(78, Stream::kSample, {0});
  CHECK(sample(m, 20, again) != sample(m, 20, other));
}

TEST_CASE("generator checkpoints round-trip exactly") {
  const GeneratorModel m = small_model();
  const Checkpoint c = Checkpoint::deserialize(m.to_checkpoint().serialize());
  CHECK(GeneratorModel::from_checkpoint(c) == m);
  Checkpoint wrong = m.to_checkpoint();
  wrong.kind = "ranker";
  CHECK_THROWS_AS(GeneratorModel::from_checkpoint(wrong), FormatError);
}
