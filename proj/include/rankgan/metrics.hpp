#pragma once

#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

#include "rankgan/corpus.hpp"
#include "rankgan/reward.hpp"

namespace rankgan {

struct BleuSpec {
  int max_n = 2;
  // Zero precisions become epsilon / (candidate n-gram count).
  double epsilon = 1e-9;
  // Cumulative: geometric mean over orders 1..max_n. Otherwise order max_n alone.
  bool cumulative = true;
  // Drop PAD/BOS and everything from the first EOS before counting.
  bool strip_special = true;

  void validate() const;
};

struct NgramHash {
  std::size_t operator()(const std::vector<int>& v) const noexcept;
};
using NgramCounts = std::unordered_map<std::vector<int>, int, NgramHash>;

NgramCounts count_ngrams(std::span<const int> tokens, int n);
std::vector<int> strip_special(std::span<const int> ids);

// Reference statistics built once: per order, the maximum count of each
// n-gram in any single reference, plus all reference lengths.
class BleuReferences {
 public:
  BleuReferences(const std::vector<std::vector<int>>& refs, const BleuSpec& spec);

  double score(std::span<const int> candidate) const;
  const BleuSpec& spec() const { return spec_; }

 private:
  BleuSpec spec_;
  std::vector<NgramCounts> max_counts_;  // index n-1
  std::vector<std::size_t> lengths_;
};

// Sentence BLEU with reference-clipped counts, epsilon-smoothed zero
// precisions and a brevity penalty against the closest reference length
// (ties go to the shorter reference). Token ids are scored as given.
double bleu(std::span<const int> candidate, const std::vector<std::vector<int>>& references,
            const BleuSpec& spec);
// TokenSeq form: applies strip_special first when spec.strip_special is set.
double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
            const BleuSpec& spec);

// Arithmetic mean of sentence BLEU of every candidate against the whole
// reference corpus.
double corpus_bleu(const Corpus& candidates, const Corpus& references, const BleuSpec& spec);

class BleuReward : public SequenceReward {
 public:
  BleuReward(const std::vector<std::vector<int>>& refs, const BleuSpec& spec)
      : refs_(refs, spec) {}
  void score(std::span<const int> ids, std::size_t count, std::size_t len,
             std::span<double> out) const override;

 private:
  BleuReferences refs_;
};

}  // namespace rankgan
