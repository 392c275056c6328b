#pragma once

// Shared helpers for the unit and acceptance tests: random tensors,
// central-difference gradient checks, and small fixtures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rankgan/corpus.hpp"
#include "rankgan/generator.hpp"
#include "rankgan/ops.hpp"
#include "rankgan/reward.hpp"
#include "rankgan/rng.hpp"
#include "rankgan/tape.hpp"
#include "rankgan/tensor.hpp"

namespace rankgan::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = lo + (hi - lo) * uniform01(rng);
  return t;
}

// Entries drawn from +-[lo, hi]: bounded away from zero for kinked functions.
inline Tensor random_signed_away_from_zero(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) {
    const double mag = lo + (hi - lo) * uniform01(rng);
    v = uniform01(rng) < 0.5 ? -mag : mag;
  }
  return t;
}

inline std::size_t random_dim(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(hi - lo + 1));
}

// Coordinate-wise relative error |a - n| / max(|a|, |n|, floor). The floor
// keeps coordinates whose true gradient is ~0 from dividing roundoff noise
// by zero; with step 1e-5 and O(1) losses, FD roundoff is ~1e-10.
inline constexpr double kFdFloor = 1e-4;

inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), kFdFloor});
}

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Builds f(inputs), reduces it to a scalar with a fixed random projection,
// and compares reverse-mode gradients against central differences for every
// input coordinate. Returns the largest relative error.
inline double max_gradient_error(const Builder& build, const std::vector<Tensor>& inputs,
                                 std::uint64_t projection_seed, double step = 1e-5) {
  Tensor projection;
  auto loss_of = [&](Tape& tape, const std::vector<Var>& vars) {
    Var out = build(tape, vars);
    if (projection.size() == 0) {
      Rng rng(projection_seed);
      projection = random_tensor(out.shape(), rng);
    }
    return ops::sum(ops::mul(out, tape.constant(projection)));
  };
  auto value_at = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& x : xs) vars.push_back(tape.constant(x));
    return loss_of(tape, vars).value().item();
  };

  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& x : inputs) vars.push_back(tape.parameter(x));
  Gradients grads = tape.backward(loss_of(tape, vars));

  double worst = 0.0;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor& g = grads.of(inputs[k]);
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k][i];
      probe[k][i] = x0 + step;
      const double up = value_at(probe);
      probe[k][i] = x0 - step;
      const double down = value_at(probe);
      probe[k][i] = x0;
      worst = std::max(worst, rel_error(g[i], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

inline TokenSeq seq(std::vector<int> ids) {
  TokenSeq s;
  s.length = ids.size();
  s.ids = std::move(ids);
  return s;
}

inline Corpus identity_corpus(std::vector<std::vector<int>> rows, std::size_t vocab) {
  Corpus c;
  c.vocab = std::make_shared<const Vocab>(Vocab::identity(vocab));
  c.fixed_len = rows.empty() ? 0 : rows.front().size();
  for (auto& r : rows) c.seqs.push_back(seq(std::move(r)));
  return c;
}

// Reward given by an arbitrary function of a complete sequence.
class FunctionReward : public SequenceReward {
 public:
  explicit FunctionReward(std::function<double(std::span<const int>)> f) : f_(std::move(f)) {}
  void score(std::span<const int> ids, std::size_t count, std::size_t len,
             std::span<double> out) const override {
    for (std::size_t i = 0; i < count; ++i) out[i] = f_(ids.subspan(i * len, len));
  }

 private:
  std::function<double(std::span<const int>)> f_;
};

// E[reward | prefix] under the generator, by enumerating every completion.
inline double exact_value(const GeneratorModel& gen, const SequenceReward& reward,
                          std::vector<int> prefix, std::size_t len) {
  LstmState state = initial_state(gen);
  int token = kBos;
  for (int w : prefix) {
    state = step(gen, token, state).second;
    token = w;
  }
  if (prefix.size() == len) {
    double r = 0.0;
    reward.score(prefix, 1, len, std::span(&r, 1));
    return r;
  }
  const std::vector<double> p = step(gen, token, state).first;
  double acc = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    std::vector<int> longer = prefix;
    longer.push_back(static_cast<int>(v));
    acc += p[v] * exact_value(gen, reward, longer, len);
  }
  return acc;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rankgan_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace rankgan::testing
