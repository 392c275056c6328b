#include "rankgan/rollout.hpp"

#include <exception>

#include "rankgan/error.hpp"
#include "rankgan/parallel.hpp"

namespace rankgan {
namespace {

struct PrefixState {
  LstmBatch state;
  std::vector<double> next_probs;
};

// Feeds BOS and the prefix tokens; the resulting distribution is for the
// token that follows the prefix.
PrefixState consume_prefix(const GeneratorModel& gen, std::span<const int> prefix) {
  PrefixState ps{LstmBatch::zeros(1, gen.dims().hidden),
                 std::vector<double>(gen.dims().vocab)};
  int tok[1] = {kBos};
  step_batch(gen, tok, ps.state, ps.next_probs);
  for (int w : prefix) {
    tok[0] = w;
    step_batch(gen, tok, ps.state, ps.next_probs);
  }
  return ps;
}

// Writes n completions of `prefix` into out rows [n, len].
void complete_paths(const GeneratorModel& gen, const PrefixState& ps,
                    std::span<const int> prefix, std::size_t len, std::size_t n,
                    std::span<Rng> rngs, std::span<int> out) {
  const std::size_t p = prefix.size();
  for (std::size_t k = 0; k < n; ++k)
    std::copy(prefix.begin(), prefix.end(), out.begin() + k * len);
  LstmBatch state = LstmBatch::broadcast(ps.state, 0, n);
  std::vector<double> probs(n * gen.dims().vocab);
  for (std::size_t k = 0; k < n; ++k)
    std::copy(ps.next_probs.begin(), ps.next_probs.end(), probs.begin() + k * gen.dims().vocab);
  continue_rows(gen, state, std::move(probs), len - p, rngs, out, len, p);
}

std::vector<Rng> path_rngs(const RolloutConfig& cfg, std::uint64_t stream_id, std::uint64_t row,
                           std::uint64_t prefix_len) {
  std::vector<Rng> rngs;
  rngs.reserve(cfg.n_paths);
  for (std::size_t k = 0; k < cfg.n_paths; ++k)
    rngs.push_back(make_rng(cfg.seed, Stream::kRollout, {stream_id, row, prefix_len, k}));
  return rngs;
}

void check_config(const RolloutConfig& cfg) {
  if (cfg.n_paths < 1) throw UsageError("rollout needs at least one path");
}

// Values for one complete sequence; see rollout_values for the layout.
void rollout_row(const GeneratorModel& gen, const SequenceReward& reward,
                 std::span<const int> seq, std::size_t row, const RolloutConfig& cfg,
                 std::uint64_t stream_id, std::span<double> values) {
  const std::size_t len = seq.size();
  const std::size_t n = cfg.n_paths;
  const std::size_t prefixes = len - 1;
  // rows: every completion for prefix lengths 1..len-1, then the sequence itself
  std::vector<int> batch((prefixes * n + 1) * len);
  PrefixState ps{LstmBatch::zeros(1, gen.dims().hidden), std::vector<double>(gen.dims().vocab)};
  int tok[1] = {kBos};
  step_batch(gen, tok, ps.state, ps.next_probs);
  for (std::size_t p = 1; p <= prefixes; ++p) {
    tok[0] = seq[p - 1];
    step_batch(gen, tok, ps.state, ps.next_probs);
    auto rngs = path_rngs(cfg, stream_id, row, p);
    complete_paths(gen, ps, seq.first(p), len, n, rngs,
                   std::span(batch).subspan((p - 1) * n * len, n * len));
  }
  std::copy(seq.begin(), seq.end(), batch.end() - static_cast<std::ptrdiff_t>(len));

  std::vector<double> scores(prefixes * n + 1);
  reward.score(batch, scores.size(), len, scores);
  for (std::size_t p = 1; p <= prefixes; ++p) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += scores[(p - 1) * n + k];
    values[p - 1] = acc / static_cast<double>(n);
  }
  values[len - 1] = scores.back();
}

}  // namespace

double rollout_value(const GeneratorModel& gen, const SequenceReward& reward,
                     std::span<const int> prefix, std::size_t len, const RolloutConfig& cfg,
                     std::uint64_t stream_id) {
  check_config(cfg);
  if (prefix.size() >= len) {
    throw UsageError("rollout prefix of length " + std::to_string(prefix.size()) +
                     " is already complete (sequence length " + std::to_string(len) +
                     "); score it directly");
  }
  const PrefixState ps = consume_prefix(gen, prefix);
  auto rngs = path_rngs(cfg, stream_id, 0, prefix.size());
  std::vector<int> paths(cfg.n_paths * len);
  complete_paths(gen, ps, prefix, len, cfg.n_paths, rngs, paths);
  std::vector<double> scores(cfg.n_paths);
  reward.score(paths, cfg.n_paths, len, scores);
  double acc = 0.0;
  for (double s : scores) acc += s;
  return acc / static_cast<double>(cfg.n_paths);
}

double rollout_value(const GeneratorModel& gen, const RankerModel& ranker,
                     std::span<const int> prefix, const ReferenceSet& refs,
                     const ComparisonSet& comps_plus, const RolloutConfig& cfg,
                     std::uint64_t stream_id) {
  const RankReward reward(ranker, refs, comps_plus);
  return rollout_value(gen, reward, prefix, ranker.fixed_len(), cfg, stream_id);
}

std::vector<double> rollout_values_serial(const GeneratorModel& gen,
                                          const SequenceReward& reward,
                                          std::span<const int> seqs, std::size_t count,
                                          std::size_t len, const RolloutConfig& cfg,
                                          std::uint64_t stream_id) {
  check_config(cfg);
  if (seqs.size() != count * len || len == 0) throw DimensionError("rollout batch layout");
  std::vector<double> values(count * len);
  for (std::size_t b = 0; b < count; ++b) {
    rollout_row(gen, reward, seqs.subspan(b * len, len), b, cfg, stream_id,
                std::span(values).subspan(b * len, len));
  }
  return values;
}

std::vector<double> rollout_values(const GeneratorModel& gen, const SequenceReward& reward,
                                   std::span<const int> seqs, std::size_t count,
                                   std::size_t len, const RolloutConfig& cfg,
                                   std::uint64_t stream_id) {
  check_config(cfg);
  if (seqs.size() != count * len || len == 0) throw DimensionError("rollout batch layout");
  std::vector<double> values(count * len);
  parallel_for(count, [&](std::size_t b) {
    rollout_row(gen, reward, seqs.subspan(b * len, len), b, cfg, stream_id,
                std::span(values).subspan(b * len, len));
  });
  return values;
}

}  // namespace rankgan
