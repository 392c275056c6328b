#include "rankgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "rankgan/error.hpp"

namespace rankgan {

void BleuSpec::validate() const {
  if (max_n < 1 || max_n > 4) throw UsageError("BLEU order must be between 1 and 4");
  if (!(epsilon >= 0.0)) throw UsageError("BLEU smoothing epsilon must be nonnegative");
}

std::size_t NgramHash::operator()(const std::vector<int>& v) const noexcept {
  std::size_t h = 1469598103934665603ULL;
  for (int x : v) {
    h ^= static_cast<std::size_t>(static_cast<unsigned>(x));
    h *= 1099511628211ULL;
  }
  return h;
}

NgramCounts count_ngrams(std::span<const int> tokens, int n) {
  NgramCounts counts;
  const auto un = static_cast<std::size_t>(n);
  if (tokens.size() < un) return counts;
  for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
    ++counts[std::vector<int>(tokens.begin() + i, tokens.begin() + i + un)];
  }
  return counts;
}

std::vector<int> strip_special(std::span<const int> ids) {
  std::vector<int> out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    out.push_back(id);
  }
  return out;
}

BleuReferences::BleuReferences(const std::vector<std::vector<int>>& refs, const BleuSpec& spec)
    : spec_(spec), max_counts_(static_cast<std::size_t>(spec.max_n)) {
  spec.validate();
  if (refs.empty()) throw UsageError("BLEU needs at least one reference");
  for (const auto& ref : refs) {
    lengths_.push_back(ref.size());
    for (int n = 1; n <= spec.max_n; ++n) {
      auto& table = max_counts_[static_cast<std::size_t>(n - 1)];
      for (const auto& [gram, c] : count_ngrams(ref, n)) {
        int& slot = table[gram];
        slot = std::max(slot, c);
      }
    }
  }
}

double BleuReferences::score(std::span<const int> candidate) const {
  const std::size_t c = candidate.size();
  if (c == 0) throw UsageError("BLEU candidate is empty");

  std::size_t r = lengths_.front();
  for (std::size_t len : lengths_) {
    const auto d = [&](std::size_t x) { return x > c ? x - c : c - x; };
    if (d(len) < d(r) || (d(len) == d(r) && len < r)) r = len;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));

  auto precision = [&](int n) {
    const auto& table = max_counts_[static_cast<std::size_t>(n - 1)];
    std::size_t total = 0, clipped = 0;
    for (const auto& [gram, cnt] : count_ngrams(candidate, n)) {
      total += static_cast<std::size_t>(cnt);
      auto it = table.find(gram);
      if (it != table.end()) clipped += static_cast<std::size_t>(std::min(cnt, it->second));
    }
    if (clipped == 0) return spec_.epsilon / static_cast<double>(std::max<std::size_t>(total, 1));
    return static_cast<double>(clipped) / static_cast<double>(total);
  };

  if (!spec_.cumulative) return bp * precision(spec_.max_n);
  double log_sum = 0.0;
  for (int n = 1; n <= spec_.max_n; ++n) {
    const double p = precision(n);
    if (p == 0.0) return 0.0;
    log_sum += std::log(p);
  }
  return bp * std::exp(log_sum / spec_.max_n);
}

double bleu(std::span<const int> candidate, const std::vector<std::vector<int>>& references,
            const BleuSpec& spec) {
  return BleuReferences(references, spec).score(candidate);
}

double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
            const BleuSpec& spec) {
  std::vector<std::vector<int>> refs;
  for (const TokenSeq& r : references)
    refs.push_back(spec.strip_special ? strip_special(r.ids) : r.ids);
  const auto cand = spec.strip_special ? strip_special(candidate.ids) : candidate.ids;
  return bleu(cand, refs, spec);
}

double corpus_bleu(const Corpus& candidates, const Corpus& references, const BleuSpec& spec) {
  if (candidates.seqs.empty() || references.seqs.empty()) {
    throw UsageError("corpus BLEU needs nonempty candidates and references");
  }
  BleuSpec s = spec;
  if (references.vocab && !references.vocab->has_reserved()) s.strip_special = false;
  std::vector<std::vector<int>> refs;
  for (const TokenSeq& r : references.seqs)
    refs.push_back(s.strip_special ? strip_special(r.ids) : r.ids);
  const BleuReferences table(refs, s);
  double acc = 0.0;
  for (const TokenSeq& cand : candidates.seqs)
    acc += table.score(s.strip_special ? strip_special(cand.ids) : cand.ids);
  return acc / static_cast<double>(candidates.seqs.size());
}

void BleuReward::score(std::span<const int> ids, std::size_t count, std::size_t len,
                       std::span<double> out) const {
  for (std::size_t i = 0; i < count; ++i) {
    auto row = ids.subspan(i * len, len);
    if (refs_.spec().strip_special) {
      const auto stripped = strip_special(row);
      out[i] = stripped.empty() ? 0.0 : refs_.score(stripped);
    } else {
      out[i] = refs_.score(row);
    }
  }
}

}  // namespace rankgan
