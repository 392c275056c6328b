#pragma once

// Sentence-BLEU cases with hand-counted clipped precisions and brevity
// penalties. Raw token ids, no special-token stripping, epsilon 1e-9.

#include <cmath>
#include <string>
#include <vector>

#include "rankgan/metrics.hpp"

namespace rankgan::testing {

struct BleuCase {
  std::string name;
  std::vector<int> candidate;
  std::vector<std::vector<int>> references;
  int max_n;
  bool cumulative;
  double expected;
};

inline std::vector<BleuCase> bleu_cases() {
  const double eps = 1e-9;
  return {
      // unigrams 3/4; bigrams {12, 23} of {12, 23, 34}: 2/3
      {"one substituted token", {1, 2, 3, 4}, {{1, 2, 3, 5}}, 2, true, std::sqrt(0.75 * (2.0 / 3.0))},
      {"identical", {1, 2, 3, 4}, {{1, 2, 3, 4}}, 2, true, 1.0},
      // no matches: both precisions smoothed to eps / count
      {"disjoint", {1, 2, 3}, {{4, 5, 6}}, 2, true, std::sqrt((eps / 3.0) * (eps / 2.0))},
      // "7" occurs 4 times, at most twice in the reference: 2/4; no bigram matches: eps/3
      {"clipped repeats", {7, 7, 7, 7}, {{7, 8, 7, 9}}, 2, true, std::sqrt(0.5 * (eps / 3.0))},
      // perfect precisions, c = 2 < r = 4: exp(1 - 4/2)
      {"short candidate", {1, 2}, {{1, 2, 3, 4}}, 2, true, std::exp(-1.0)},
      // unigram 3 and bigram 23 only appear in the second reference
      {"counts pooled over references", {1, 2, 3}, {{1, 2}, {4, 2, 3, 9, 9}}, 2, true, 1.0},
      // reference lengths 4 and 2 tie around c = 3: the shorter wins, no penalty;
      // unigrams 2/3, bigrams 1/2
      {"length tie picks the shorter reference", {1, 2, 3}, {{1, 2, 9, 9}, {5, 6}}, 2, true,
       std::sqrt((2.0 / 3.0) * 0.5)},
      {"order-2 precision alone", {1, 2, 3, 4}, {{1, 2, 3, 5}}, 2, false, 2.0 / 3.0},
      // c = 6 > r = 3: no penalty; 3/6
      {"long candidate BLEU-1", {1, 2, 3, 4, 5, 6}, {{1, 2, 3}}, 1, true, 0.5},
      // precisions 4/5, 3/4, 2/3, 1/2
      {"BLEU-4", {1, 2, 3, 4, 5}, {{1, 2, 3, 4, 6}}, 4, true,
       std::pow(0.8 * 0.75 * (2.0 / 3.0) * 0.5, 0.25)},
      // perfect precisions, c = 3, r = 6: exp(1 - 2)
      {"BLEU-3 brevity", {1, 2, 3}, {{1, 2, 3, 4, 5, 6}}, 3, true, std::exp(-1.0)},
  };
}

inline BleuSpec bleu_case_spec(const BleuCase& c) {
  BleuSpec spec;
  spec.max_n = c.max_n;
  spec.cumulative = c.cumulative;
  spec.epsilon = 1e-9;
  spec.strip_special = false;
  return spec;
}

}  // namespace rankgan::testing
