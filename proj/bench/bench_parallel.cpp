// Serial reference kernels against their OpenMP counterparts. The argument
// of the parallel variants is the thread count.

#include <benchmark/benchmark.h>

#include <span>
#include <vector>

#include "rankgan/generator.hpp"
#include "rankgan/oracle.hpp"
#include "rankgan/parallel.hpp"
#include "rankgan/ranker.hpp"
#include "rankgan/rollout.hpp"

using namespace rankgan;

namespace {

constexpr std::size_t kLen = 20;
constexpr std::size_t kBatch = 16;

const Oracle& oracle() {
  static const Oracle o = make_oracle(1, {500, 32, 32});
  return o;
}

const GeneratorModel& generator() {
  static const GeneratorModel g = GeneratorModel::init_uniform({500, 32, 32}, 2);
  return g;
}

struct RankFixture {
  RankerModel ranker;
  ReferenceSet refs;
  ComparisonSet comps;
  std::vector<int> batch;
};

const RankFixture& rank_fixture() {
  static const RankFixture f = [] {
    RankFixture r;
    EncoderConfig cfg;
    cfg.vocab = 500;
    r.ranker = RankerModel(CnnEncoder::init_uniform(cfg, 3), 4.0, kLen);
    const Corpus c = generate_synthetic(oracle(), kBatch + 2, kLen, 4);
    r.refs.sentences = {c.seqs[0]};
    r.comps.sentences = {c.seqs[1]};
    for (std::size_t i = 2; i < c.seqs.size(); ++i)
      r.batch.insert(r.batch.end(), c.seqs[i].ids.begin(), c.seqs[i].ids.end());
    return r;
  }();
  return f;
}

void BM_RolloutSerial(benchmark::State& state) {
  const RankFixture& f = rank_fixture();
  const RankReward reward(f.ranker, f.refs, f.comps);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        rollout_values_serial(generator(), reward, f.batch, kBatch, kLen, {16, 5}, 0));
}

void BM_RolloutParallel(benchmark::State& state) {
  set_thread_count(static_cast<int>(state.range(0)));
  const RankFixture& f = rank_fixture();
  const RankReward reward(f.ranker, f.refs, f.comps);
  for (auto _ : state)
    benchmark::DoNotOptimize(rollout_values(generator(), reward, f.batch, kBatch, kLen, {16, 5}, 0));
}

void BM_OracleNllSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(oracle_nll_serial(oracle(), generator(), 2000, kLen, 6));
}

void BM_OracleNllParallel(benchmark::State& state) {
  set_thread_count(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(oracle_nll(oracle(), generator(), 2000, kLen, 6));
}

}  // namespace

BENCHMARK(BM_RolloutSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RolloutParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OracleNllSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OracleNllParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
