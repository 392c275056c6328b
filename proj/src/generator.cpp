#include "rankgan/generator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rankgan/checkpoint.hpp"
#include "rankgan/error.hpp"
#include "rankgan/ops.hpp"

namespace rankgan {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_token(const GeneratorModel& model, int token) {
  if (token < 0 || static_cast<std::size_t>(token) >= model.dims().vocab) {
    throw UsageError("token id " + std::to_string(token) + " outside vocabulary of size " +
                     std::to_string(model.dims().vocab));
  }
}

}  // namespace

GeneratorModel::GeneratorModel(GeneratorDims dims)
    : embedding({dims.vocab, dims.embed}),
      w_input({dims.embed, 4 * dims.hidden}),
      w_hidden({dims.hidden, 4 * dims.hidden}),
      bias({1, 4 * dims.hidden}),
      w_out({dims.hidden, dims.vocab}),
      b_out({1, dims.vocab}),
      dims_(dims) {
  if (dims.vocab == 0 || dims.embed == 0 || dims.hidden == 0) {
    throw DimensionError("generator dimensions must be positive");
  }
}

GeneratorModel GeneratorModel::init_uniform(GeneratorDims dims, std::uint64_t seed,
                                            double scale) {
  GeneratorModel m(dims);
  m.seed_ = seed;
  Rng rng = make_rng(seed, Stream::kInit);
  for (Tensor* p : m.parameters())
    for (double& v : p->data()) v = (2.0 * uniform01(rng) - 1.0) * scale;
  return m;
}

GeneratorModel GeneratorModel::init_normal(GeneratorDims dims, std::uint64_t seed,
                                           double stddev) {
  GeneratorModel m(dims);
  m.seed_ = seed;
  Rng rng = make_rng(seed, Stream::kInit);
  std::normal_distribution<double> normal(0.0, stddev);
  for (Tensor* p : m.parameters())
    for (double& v : p->data()) v = normal(rng);
  return m;
}

std::vector<Tensor*> GeneratorModel::parameters() {
  return {&embedding, &w_input, &w_hidden, &bias, &w_out, &b_out};
}

std::vector<const Tensor*> GeneratorModel::parameters() const {
  return {&embedding, &w_input, &w_hidden, &bias, &w_out, &b_out};
}

const std::vector<std::string>& GeneratorModel::parameter_names() {
  static const std::vector<std::string> names = {"embedding", "w_input", "w_hidden",
                                                 "bias",      "w_out",   "b_out"};
  return names;
}

bool GeneratorModel::is_finite() const {
  for (const Tensor* p : parameters())
    if (!p->is_finite()) return false;
  return true;
}

Checkpoint GeneratorModel::to_checkpoint() const {
  Checkpoint c;
  c.kind = "generator";
  c.set_field("vocab_size", dims_.vocab);
  c.set_field("embed_dim", dims_.embed);
  c.set_field("hidden_dim", dims_.hidden);
  c.set_field("seed", seed_);
  const auto params = parameters();
  for (std::size_t i = 0; i < params.size(); ++i) c.add_block(parameter_names()[i], *params[i]);
  return c;
}

GeneratorModel GeneratorModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "generator") {
    throw FormatError("expected a generator checkpoint, got '" + ckpt.kind + "'");
  }
  GeneratorDims dims{ckpt.field("vocab_size"), ckpt.field("embed_dim"), ckpt.field("hidden_dim")};
  GeneratorModel m(dims);
  m.seed_ = ckpt.field("seed");
  auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = ckpt.block(parameter_names()[i]);
    if (t.shape() != params[i]->shape()) {
      throw FormatError("block '" + parameter_names()[i] + "' has shape " +
                        shape_string(t.shape()) + ", expected " +
                        shape_string(params[i]->shape()));
    }
    *params[i] = t;
  }
  return m;
}

bool operator==(const GeneratorModel& a, const GeneratorModel& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!(*pa[i] == *pb[i])) return false;
  return true;
}

LstmBatch LstmBatch::zeros(std::size_t rows, std::size_t hidden) {
  return {rows, std::vector<double>(rows * hidden, 0.0), std::vector<double>(rows * hidden, 0.0)};
}

LstmBatch LstmBatch::broadcast(const LstmBatch& src, std::size_t r, std::size_t rows) {
  const std::size_t hidden = src.h.size() / src.rows;
  LstmBatch out{rows, std::vector<double>(rows * hidden), std::vector<double>(rows * hidden)};
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(src.h.begin() + r * hidden, hidden, out.h.begin() + i * hidden);
    std::copy_n(src.c.begin() + r * hidden, hidden, out.c.begin() + i * hidden);
  }
  return out;
}

void step_batch(const GeneratorModel& model, std::span<const int> tokens, LstmBatch& state,
                std::span<double> out, bool log_probs) {
  const std::size_t rows = tokens.size();
  const std::size_t E = model.dims().embed, H = model.dims().hidden, V = model.dims().vocab;
  if (state.rows != rows || out.size() != rows * V) {
    throw DimensionError("step_batch: state/output sizes do not match the token batch");
  }
  std::vector<double> x(rows * E);
  for (std::size_t r = 0; r < rows; ++r) {
    check_token(model, tokens[r]);
    std::copy_n(model.embedding.data().begin() + static_cast<std::size_t>(tokens[r]) * E, E,
                x.begin() + r * E);
  }
  std::vector<double> gates(rows * 4 * H);
  kernels::gemm(x, model.w_input.data(), gates, rows, E, 4 * H, false);
  kernels::gemm(state.h, model.w_hidden.data(), gates, rows, H, 4 * H, true);
  for (std::size_t r = 0; r < rows; ++r) {
    double* g = gates.data() + r * 4 * H;
    double* h = state.h.data() + r * H;
    double* c = state.c.data() + r * H;
    for (std::size_t j = 0; j < H; ++j) {
      const double in = sigmoid(g[j] + model.bias[j]);
      const double fg = sigmoid(g[H + j] + model.bias[H + j]);
      const double og = sigmoid(g[2 * H + j] + model.bias[2 * H + j]);
      const double cand = std::tanh(g[3 * H + j] + model.bias[3 * H + j]);
      c[j] = fg * c[j] + in * cand;
      h[j] = og * std::tanh(c[j]);
    }
  }
  kernels::gemm(state.h, model.w_out.data(), out, rows, H, V, false);
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * V;
    double mx = -INFINITY;
    for (std::size_t v = 0; v < V; ++v) {
      row[v] += model.b_out[v];
      mx = std::max(mx, row[v]);
    }
    if (log_probs) {
      double z = 0.0;
      for (std::size_t v = 0; v < V; ++v) z += std::exp(row[v] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t v = 0; v < V; ++v) row[v] -= lse;
    } else {
      double z = 0.0;
      for (std::size_t v = 0; v < V; ++v) z += (row[v] = std::exp(row[v] - mx));
      for (std::size_t v = 0; v < V; ++v) row[v] /= z;
    }
  }
}

LstmState initial_state(const GeneratorModel& model) {
  return {std::vector<double>(model.dims().hidden, 0.0),
          std::vector<double>(model.dims().hidden, 0.0)};
}

std::pair<std::vector<double>, LstmState> step(const GeneratorModel& model, int token,
                                               const LstmState& state) {
  const std::size_t H = model.dims().hidden;
  if (state.h.size() != H || state.c.size() != H) {
    throw DimensionError("LSTM state does not match hidden size");
  }
  LstmBatch batch{1, state.h, state.c};
  std::vector<double> probs(model.dims().vocab);
  const int tok[1] = {token};
  step_batch(model, tok, batch, probs);
  return {std::move(probs), LstmState{std::move(batch.h), std::move(batch.c)}};
}

void continue_rows(const GeneratorModel& model, LstmBatch& state, std::vector<double> next_probs,
                   std::size_t steps, std::span<Rng> rngs, std::span<int> out,
                   std::size_t out_stride, std::size_t out_offset) {
  const std::size_t rows = rngs.size();
  const std::size_t V = model.dims().vocab;
  std::vector<int> tokens(rows);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t r = 0; r < rows; ++r) {
      tokens[r] = sample_categorical(std::span<const double>(next_probs).subspan(r * V, V), rngs[r]);
      out[r * out_stride + out_offset + s] = tokens[r];
    }
    if (s + 1 < steps) step_batch(model, tokens, state, next_probs);
  }
}

std::vector<int> sample_rows(const GeneratorModel& model, std::size_t len, std::span<Rng> rngs) {
  const std::size_t rows = rngs.size();
  std::vector<int> out(rows * len);
  if (rows == 0 || len == 0) return out;
  LstmBatch state = LstmBatch::zeros(rows, model.dims().hidden);
  std::vector<int> bos(rows, kBos);
  std::vector<double> probs(rows * model.dims().vocab);
  step_batch(model, bos, state, probs);
  continue_rows(model, state, std::move(probs), len, rngs, out, len, 0);
  return out;
}

TokenSeq sample(const GeneratorModel& model, std::size_t len, Rng& rng) {
  if (len < 1) throw UsageError("sample length must be at least 1");
  TokenSeq seq;
  seq.ids = sample_rows(model, len, std::span<Rng>(&rng, 1));
  seq.length = len;
  return seq;
}

std::vector<double> nll_rows(const GeneratorModel& model, std::span<const int> ids,
                             std::size_t count, std::size_t len) {
  if (ids.size() != count * len) throw DimensionError("nll_rows: id buffer size mismatch");
  const std::size_t V = model.dims().vocab;
  std::vector<double> out(count, 0.0);
  if (count == 0) return out;
  LstmBatch state = LstmBatch::zeros(count, model.dims().hidden);
  std::vector<int> tokens(count, kBos);
  std::vector<double> logp(count * V);
  for (std::size_t t = 0; t < len; ++t) {
    step_batch(model, tokens, state, logp, true);
    for (std::size_t r = 0; r < count; ++r) {
      const int w = ids[r * len + t];
      check_token(model, w);
      out[r] -= logp[r * V + static_cast<std::size_t>(w)];
      tokens[r] = w;
    }
  }
  return out;
}

double nll(const GeneratorModel& model, std::span<const int> ids) {
  return nll_rows(model, ids, 1, ids.size())[0];
}

GeneratorVars GeneratorVars::on(Tape& tape, const GeneratorModel& m, bool trainable) {
  auto leaf = [&](const Tensor& t) { return trainable ? tape.parameter(t) : tape.constant(t); };
  return {leaf(m.embedding), leaf(m.w_input), leaf(m.w_hidden),
          leaf(m.bias),      leaf(m.w_out),   leaf(m.b_out)};
}

LstmStepVars lstm_step(Tape& tape, const GeneratorVars& vars, std::span<const int> tokens,
                       Var h, Var c) {
  const std::size_t rows = tokens.size();
  const std::size_t H = vars.w_hidden.shape()[0];
  Var x = ops::take_rows(vars.embedding, tokens);
  Var ones = tape.constant(Tensor({rows, 1}, 1.0));
  Var gates = ops::add(ops::add(ops::matmul(x, vars.w_input), ops::matmul(h, vars.w_hidden)),
                       ops::matmul(ones, vars.bias));
  Var in = ops::sigmoid(ops::slice_cols(gates, 0, H));
  Var fg = ops::sigmoid(ops::slice_cols(gates, H, 2 * H));
  Var og = ops::sigmoid(ops::slice_cols(gates, 2 * H, 3 * H));
  Var cand = ops::tanh(ops::slice_cols(gates, 3 * H, 4 * H));
  Var c_next = ops::add(ops::mul(fg, c), ops::mul(in, cand));
  Var h_next = ops::mul(og, ops::tanh(c_next));
  Var logits = ops::add(ops::matmul(h_next, vars.w_out), ops::matmul(ones, vars.b_out));
  return {logits, h_next, c_next};
}

Var sequence_log_probs(Tape& tape, const GeneratorVars& vars, std::span<const int> ids,
                       std::size_t batch, std::size_t len) {
  if (ids.size() != batch * len || batch == 0 || len == 0) {
    throw DimensionError("sequence_log_probs: bad batch layout");
  }
  const std::size_t H = vars.w_hidden.shape()[0];
  const std::size_t V = vars.w_out.shape()[1];
  Var h = tape.constant(Tensor({batch, H}));
  Var c = tape.constant(Tensor({batch, H}));
  std::vector<int> tokens(batch, kBos);
  std::vector<Var> picks;
  picks.reserve(len);
  for (std::size_t t = 0; t < len; ++t) {
    LstmStepVars s = lstm_step(tape, vars, tokens, h, c);
    Var logp = ops::log_softmax(s.logits, 1);
    std::vector<std::size_t> idx(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const int w = ids[b * len + t];
      if (w < 0 || static_cast<std::size_t>(w) >= V) throw UsageError("token id out of range");
      idx[b] = b * V + static_cast<std::size_t>(w);
      tokens[b] = w;
    }
    picks.push_back(ops::gather(logp, std::move(idx), {batch, 1}));
    h = s.h;
    c = s.c;
  }
  return ops::concat_cols(picks);
}

double apply_sgd(std::span<Tensor* const> params, Gradients& grads, const SgdConfig& cfg) {
  if (!grads.all_finite()) throw TrainingAborted("non-finite gradient");
  const double norm = grads.global_norm();
  if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) grads.scale(cfg.clip_norm / norm);
  if (cfg.learning_rate == 0.0) return norm;
  for (Tensor* p : params) {
    if (!grads.contains(*p)) continue;
    const Tensor& g = grads.of(*p);
    for (std::size_t i = 0; i < p->size(); ++i) (*p)[i] -= cfg.learning_rate * g[i];
  }
  return norm;
}

std::vector<int> flatten(std::span<const TokenSeq> seqs, std::size_t len) {
  std::vector<int> ids;
  ids.reserve(seqs.size() * len);
  for (const TokenSeq& s : seqs) {
    if (s.ids.size() != len) throw DimensionError("sequence length differs from batch length");
    ids.insert(ids.end(), s.ids.begin(), s.ids.end());
  }
  return ids;
}

double mle_step(GeneratorModel& model, std::span<const TokenSeq> batch, const SgdConfig& cfg) {
  if (batch.empty()) throw UsageError("mle_step needs a nonempty batch");
  const std::size_t len = batch.front().ids.size();
  const std::vector<int> ids = flatten(batch, len);
  Tape tape;
  GeneratorVars vars = GeneratorVars::on(tape, model, true);
  Var lp = sequence_log_probs(tape, vars, ids, batch.size(), len);
  Var loss = ops::scale(ops::mean(lp), -1.0);
  const double value = loss.value().item();
  if (!std::isfinite(value)) throw TrainingAborted("non-finite MLE loss");
  Gradients grads = tape.backward(loss);
  auto params = model.parameters();
  apply_sgd(params, grads, cfg);
  return value;
}

}  // namespace rankgan
