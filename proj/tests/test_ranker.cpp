#include <doctest.h>

#include <cmath>
#include <vector>

#include "rankgan/checkpoint.hpp"
#include "rankgan/error.hpp"
#include "rankgan/ranker.hpp"
#include "support.hpp"

using namespace rankgan;
using namespace rankgan::testing;

namespace {

RankerModel small_ranker(std::uint64_t seed = 9, double gamma = 4.0, std::size_t len = 6) {
  EncoderConfig cfg;
  cfg.vocab = 8;
  cfg.embed = 5;
  cfg.widths = {2, 3};
  cfg.filters_per_width = 4;
  return RankerModel(CnnEncoder::init_uniform(cfg, seed, 0.5), gamma, len);
}

TokenSeq random_seq(Rng& rng, std::size_t len = 6, std::size_t vocab = 8) {
  std::vector<int> ids(len);
  for (int& t : ids) t = static_cast<int>(random_dim(rng, 0, vocab - 1));
  return seq(ids);
}

std::vector<double> random_relevances(Rng& rng, std::size_t n) {
  std::vector<double> a(n);
  for (double& v : a) v = 2.0 * uniform01(rng) - 1.0;
  return a;
}

// Score of member i of C' given the relevances of all members.
double member_score(const std::vector<double>& a, std::size_t i, double gamma) {
  std::vector<double> others;
  for (std::size_t j = 0; j < a.size(); ++j)
    if (j != i) others.push_back(a[j]);
  return rank_score_from_relevances(a[i], others, gamma);
}

}  // namespace

TEST_CASE("relevance is the cosine of two features") {
  CHECK(relevance({{1.0, 2.0}}, {{1.0, 2.0}}) == doctest::Approx(1.0));
  CHECK(relevance({{1.0, 0.0}}, {{0.0, 3.0}}) == 0.0);
  CHECK(relevance({{1.0, 0.0}}, {{-1.0, 0.0}}) == -1.0);
  CHECK_THROWS_AS(relevance({{0.0, 0.0}}, {{1.0, 0.0}}), DegenerateFeatureError);
  CHECK_THROWS_AS(relevance({{1.0}}, {{1.0, 0.0}}), DimensionError);
}

TEST_CASE("rank score of three members matches a scalar recomputation") {
  const std::vector<double> others = {0.1, 0.1};
  const double e = std::exp(2.0 * 0.9), o = std::exp(2.0 * 0.1);
  CHECK(rank_score_from_relevances(0.9, others, 2.0) == doctest::Approx(e / (e + 2 * o)).epsilon(1e-14));
  CHECK(rank_score_from_relevances(0.3, {}, 2.0) == 1.0);
}

TEST_CASE("rank scores over C' sum to one and ignore a common shift") {
  Rng rng(21);
  for (int config = 0; config < 1000; ++config) {
    const std::size_t n = random_dim(rng, 1, 12);
    const double gamma = 0.01 + 20.0 * uniform01(rng);
    const auto a = random_relevances(rng, n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += member_score(a, i, gamma);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    const double shift = 200.0 * uniform01(rng) - 100.0;
    std::vector<double> others(a.begin() + 1, a.end());
    CHECK(rank_score_from_relevances(a[0], others, gamma, shift) ==
          doctest::Approx(rank_score_from_relevances(a[0], others, gamma)).epsilon(1e-12));
  }
}

TEST_CASE("a vanishing gamma makes all members equiprobable") {
  Rng rng(22);
  for (int config = 0; config < 1000; ++config) {
    const std::size_t n = random_dim(rng, 1, 12);
    const auto a = random_relevances(rng, n);
    std::vector<double> others(a.begin() + 1, a.end());
    CHECK(rank_score_from_relevances(a[0], others, 1e-9) ==
          doctest::Approx(1.0 / static_cast<double>(n)).epsilon(1e-7));
  }
}

TEST_CASE("rank score increases with the input's relevance") {
  Rng rng(23);
  for (int config = 0; config < 1000; ++config) {
    const std::size_t n = random_dim(rng, 2, 12);
    const double gamma = 0.1 + 10.0 * uniform01(rng);
    auto a = random_relevances(rng, n);
    std::vector<double> others(a.begin() + 1, a.end());
    const double lo = rank_score_from_relevances(a[0], others, gamma);
    const double hi = rank_score_from_relevances(a[0] + 0.05 + 0.5 * uniform01(rng), others, gamma);
    CHECK(hi > lo);
  }
}

TEST_CASE("a larger gamma sharpens toward the most relevant member") {
  Rng rng(24);
  for (int config = 0; config < 1000; ++config) {
    const std::size_t n = random_dim(rng, 2, 12);
    auto a = random_relevances(rng, n);
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (a[i] > a[best]) best = i;
    // A unique argmax: ties cannot be sharpened.
    bool unique = true;
    for (std::size_t i = 0; i < n; ++i)
      if (i != best && a[best] - a[i] < 1e-6) unique = false;
    if (!unique) continue;
    const double gamma = 0.1 + 5.0 * uniform01(rng);
    CHECK(member_score(a, best, gamma * 1.5) > member_score(a, best, gamma));
  }
}

TEST_CASE("expected rank is the mean of per-reference rank scores") {
  const RankerModel r = small_ranker();
  Rng rng(25);
  const TokenSeq s = random_seq(rng);
  ReferenceSet u;
  for (int i = 0; i < 4; ++i) u.sentences.push_back(random_seq(rng));
  ComparisonSet c;
  for (int i = 0; i < 3; ++i) c.sentences.push_back(random_seq(rng));
  double mean = 0.0;
  for (const TokenSeq& ref : u.sentences) mean += rank_score(s, ref, c, r);
  CHECK(expected_rank(s, u, c, r) == doctest::Approx(mean / 4.0).epsilon(1e-14));

  ReferenceSet one{{u.sentences[0]}};
  CHECK(expected_rank(s, one, c, r) == rank_score(s, u.sentences[0], c, r));
  ReferenceSet same{{u.sentences[1], u.sentences[1], u.sentences[1]}};
  CHECK(expected_rank(s, same, c, r) == doctest::Approx(rank_score(s, u.sentences[1], c, r)).epsilon(1e-14));

  const double er = expected_rank(s, u, c, r);
  CHECK((er > 0.0 && er < 1.0));
  CHECK(expected_rank(s, u, ComparisonSet{}, r) == 1.0);
  CHECK_THROWS_AS(expected_rank(s, ReferenceSet{}, c, r), UsageError);
}

TEST_CASE("the cached reward and the differentiable objective agree with direct scoring") {
  const RankerModel r = small_ranker();
  Rng rng(26);
  ReferenceSet u;
  for (int i = 0; i < 3; ++i) u.sentences.push_back(random_seq(rng));
  ComparisonSet c;
  for (int i = 0; i < 2; ++i) c.sentences.push_back(random_seq(rng));
  std::vector<TokenSeq> inputs;
  for (int i = 0; i < 5; ++i) inputs.push_back(random_seq(rng));
  const auto ids = flatten(inputs, 6);

  RankReward reward(r, u, c);
  std::vector<double> out(5);
  reward.score(ids, 5, 6, out);

  Tape tape;
  Var log_r = log_expected_rank(tape, EncoderVars::on(tape, r.encoder(), false), r, ids, 5,
                                flatten(u.sentences, 6), 3, flatten(c.sentences, 6), 2);
  for (std::size_t i = 0; i < 5; ++i) {
    const double direct = expected_rank(inputs[i], u, c, r);
    CHECK(out[i] == doctest::Approx(direct).epsilon(1e-12));
    CHECK(log_r.value()[i] == doctest::Approx(std::log(direct)).epsilon(1e-12));
  }
}

TEST_CASE("a cached reward refuses to score after the ranker changes") {
  RankerModel r = small_ranker();
  Rng rng(27);
  ReferenceSet u{{random_seq(rng)}};
  ComparisonSet c{{random_seq(rng)}};
  RankReward reward(r, u, c);
  const auto ids = random_seq(rng).ids;
  std::vector<double> out(1);
  reward.score(ids, 1, 6, out);
  r.bump_version();
  CHECK_THROWS_AS(reward.score(ids, 1, 6, out), UsageError);
}

TEST_CASE("ranker inputs must have the configured length") {
  const RankerModel r = small_ranker();
  Rng rng(28);
  CHECK_THROWS_AS(encode(r, random_seq(rng, 5)), UsageError);
  CHECK_THROWS_AS(small_ranker(1, 4.0, 2).encoder(), DimensionError);  // width 3 > length 2
  CHECK_THROWS_AS(small_ranker(1, 0.0), UsageError);
}

TEST_CASE("ranker checkpoints round-trip exactly") {
  const RankerModel r = small_ranker(4, 2.5);
  const RankerModel back =
      RankerModel::from_checkpoint(Checkpoint::deserialize(r.to_checkpoint().serialize()));
  CHECK(back == r);
  CHECK(back.gamma() == 2.5);
  CHECK_FALSE(small_ranker(4) == small_ranker(5));
}
