#include "rankgan/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "rankgan/error.hpp"
#include "rankgan/parallel.hpp"

namespace rankgan {
namespace {

constexpr std::size_t kChunk = 64;

// Rows [begin, end) sampled from `gen`, row i seeded from (seed, purpose, i).
std::vector<int> sample_range(const GeneratorModel& gen, std::size_t begin, std::size_t end,
                              std::size_t len, std::uint64_t seed, Stream purpose) {
  std::vector<Rng> rngs;
  rngs.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) rngs.push_back(make_rng(seed, purpose, {i}));
  return sample_rows(gen, len, rngs);
}

NllEstimate summarize(const std::vector<double>& values, std::size_t len) {
  NllEstimate e;
  e.samples = values.size();
  if (values.empty()) return e;
  double sum = 0.0;
  for (double v : values) sum += v;
  e.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - e.mean) * (v - e.mean);
  if (values.size() > 1) {
    e.std_error = std::sqrt(sq / static_cast<double>(values.size() - 1) /
                            static_cast<double>(values.size()));
  }
  e.per_token = e.mean / static_cast<double>(len);
  return e;
}

}  // namespace

Oracle make_oracle(std::uint64_t seed, GeneratorDims dims, double init_std) {
  return Oracle(GeneratorModel::init_normal(dims, seed, init_std));
}

Corpus generate_synthetic(const Oracle& oracle, std::size_t count, std::size_t len,
                          std::uint64_t seed) {
  if (count < 1) throw UsageError("synthetic corpus needs at least one sequence");
  if (len < 1) throw UsageError("synthetic sequence length must be at least 1");
  Corpus c;
  c.vocab = std::make_shared<const Vocab>(Vocab::identity(oracle.vocab_size()));
  c.fixed_len = len;
  c.seqs.resize(count);
  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t ch) {
    const std::size_t begin = ch * kChunk, end = std::min(count, begin + kChunk);
    const auto ids = sample_range(oracle.model(), begin, end, len, seed, Stream::kSynthetic);
    for (std::size_t i = begin; i < end; ++i) {
      auto first = ids.begin() + static_cast<std::ptrdiff_t>((i - begin) * len);
      c.seqs[i].ids.assign(first, first + static_cast<std::ptrdiff_t>(len));
      c.seqs[i].length = len;
    }
  });
  return c;
}

std::vector<double> oracle_nll_samples(const Oracle& oracle, const GeneratorModel& gen,
                                       std::size_t n_samples, std::size_t len,
                                       std::uint64_t seed, bool parallel) {
  if (gen.dims().vocab != oracle.vocab_size()) {
    throw UsageError("generator vocabulary size " + std::to_string(gen.dims().vocab) +
                     " differs from oracle vocabulary size " +
                     std::to_string(oracle.vocab_size()));
  }
  std::vector<double> values(n_samples);
  const std::size_t chunks = (n_samples + kChunk - 1) / kChunk;
  auto work = [&](std::size_t ch) {
    const std::size_t begin = ch * kChunk, end = std::min(n_samples, begin + kChunk);
    const auto ids = sample_range(gen, begin, end, len, seed, Stream::kEval);
    const auto nll = nll_rows(oracle.model(), ids, end - begin, len);
    std::copy(nll.begin(), nll.end(), values.begin() + static_cast<std::ptrdiff_t>(begin));
  };
  if (parallel) {
    parallel_for(chunks, work);
  } else {
    for (std::size_t ch = 0; ch < chunks; ++ch) work(ch);
  }
  return values;
}

NllEstimate oracle_nll(const Oracle& oracle, const GeneratorModel& gen, std::size_t n_samples,
                       std::size_t len, std::uint64_t seed) {
  return summarize(oracle_nll_samples(oracle, gen, n_samples, len, seed, true), len);
}

NllEstimate oracle_nll_serial(const Oracle& oracle, const GeneratorModel& gen,
                              std::size_t n_samples, std::size_t len, std::uint64_t seed) {
  return summarize(oracle_nll_samples(oracle, gen, n_samples, len, seed, false), len);
}

}  // namespace rankgan
