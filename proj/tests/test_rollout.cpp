#include <doctest.h>

#include <cmath>
#include <vector>

#include "rankgan/error.hpp"
#include "rankgan/parallel.hpp"
#include "rankgan/rollout.hpp"
#include "support.hpp"

using namespace rankgan;
using namespace rankgan::testing;

namespace {

GeneratorModel binary_generator() { return GeneratorModel::init_uniform({2, 3, 4}, 31, 1.0); }

// A reward with distinct values for all eight length-3 binary sequences.
double table_reward(std::span<const int> ids) {
  double r = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) r = 2.0 * r + ids[i];
  return 0.1 + r / 7.0;
}

}  // namespace

TEST_CASE("rollout values agree with exact enumeration") {
  const GeneratorModel gen = binary_generator();
  const FunctionReward reward(table_reward);
  const FunctionReward squared([](std::span<const int> ids) { return std::pow(table_reward(ids), 2); });
  const std::vector<std::vector<int>> prefixes = {{}, {0}, {1}, {0, 1}, {1, 1}};
  for (const auto& prefix : prefixes) {
    const double mean = exact_value(gen, reward, prefix, 3);
    const double var = exact_value(gen, squared, prefix, 3) - mean * mean;
    const double estimate = rollout_value(gen, reward, prefix, 3, {10000, 5});
    INFO("prefix length " << prefix.size());
    CHECK(std::abs(estimate - mean) <= 3.0 * std::sqrt(var / 10000.0));
  }
}

TEST_CASE("the last value of a sequence is its own reward") {
  const GeneratorModel gen = binary_generator();
  const FunctionReward reward(table_reward);
  const std::vector<int> seqs = {0, 1, 1, 1, 0, 0};
  const auto v = rollout_values(gen, reward, seqs, 2, 3, {8, 1}, 0);
  CHECK(v[2] == table_reward(std::span(seqs).subspan(0, 3)));
  CHECK(v[5] == table_reward(std::span(seqs).subspan(3, 3)));
}

TEST_CASE("batched rollout values reuse the single-prefix streams") {
  const GeneratorModel gen = binary_generator();
  const FunctionReward reward(table_reward);
  const std::vector<int> seqs = {1, 0, 1};
  const auto v = rollout_values(gen, reward, seqs, 1, 3, {16, 9}, 4);
  CHECK(v[0] == rollout_value(gen, reward, std::vector<int>{1}, 3, {16, 9}, 4));
  CHECK(v[1] == rollout_value(gen, reward, std::vector<int>{1, 0}, 3, {16, 9}, 4));
}

TEST_CASE("parallel rollouts match the serial reference bit for bit") {
  const GeneratorModel gen = GeneratorModel::init_uniform({6, 4, 5}, 8, 0.7);
  const FunctionReward reward([](std::span<const int> ids) {
    double r = 0.0;
    for (int t : ids) r += t == 3 ? 1.0 : 0.0;
    return r / static_cast<double>(ids.size());
  });
  Rng rng(3);
  std::vector<int> seqs(7 * 5);
  for (int& t : seqs) t = static_cast<int>(random_dim(rng, 0, 5));
  const auto serial = rollout_values_serial(gen, reward, seqs, 7, 5, {6, 2}, 11);
  for (int threads : {1, 2, 3, 8}) {
    set_thread_count(threads);
    CHECK(rollout_values(gen, reward, seqs, 7, 5, {6, 2}, 11) == serial);
  }
  set_thread_count(1);
}

TEST_CASE("rollout estimator variance falls as one over the number of paths") {
  const GeneratorModel gen = binary_generator();
  const FunctionReward reward(table_reward);
  std::vector<double> log_n, log_var;
  for (std::size_t n : {1, 4, 16, 64}) {
    std::vector<double> xs;
    for (std::uint64_t rep = 0; rep < 400; ++rep)
      xs.push_back(rollout_value(gen, reward, std::vector<int>{0}, 3, {n, 1000 + rep}));
    double mean = 0.0, var = 0.0;
    for (double x : xs) mean += x / static_cast<double>(xs.size());
    for (double x : xs) var += (x - mean) * (x - mean) / static_cast<double>(xs.size() - 1);
    log_n.push_back(std::log(static_cast<double>(n)));
    log_var.push_back(std::log(var));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < 4; ++i) mx += log_n[i] / 4.0, my += log_var[i] / 4.0;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    sxy += (log_n[i] - mx) * (log_var[i] - my);
    sxx += (log_n[i] - mx) * (log_n[i] - mx);
  }
  const double slope = sxy / sxx;
  INFO("slope " << slope);
  CHECK((slope >= -1.3 && slope <= -0.7));
}

TEST_CASE("rollout argument errors") {
  const GeneratorModel gen = binary_generator();
  const FunctionReward reward(table_reward);
  CHECK_THROWS_AS(rollout_value(gen, reward, std::vector<int>{0, 1, 0}, 3, {4, 1}), UsageError);
  CHECK_THROWS_AS(rollout_value(gen, reward, std::vector<int>{0}, 3, {0, 1}), UsageError);
  CHECK_THROWS_AS(rollout_values(gen, reward, std::vector<int>{0, 1}, 1, 3, {4, 1}, 0),
                  DimensionError);
}
