#include "rankgan/discriminator.hpp"

#include <cmath>

#include "rankgan/checkpoint.hpp"
#include "rankgan/error.hpp"
#include "rankgan/rng.hpp"

namespace rankgan {

Discriminator::Discriminator(CnnEncoder encoder, std::size_t fixed_len)
    : w_cls({encoder.feature_dim(), 2}),
      b_cls({1, 2}),
      encoder_(std::move(encoder)),
      fixed_len_(fixed_len) {
  for (std::size_t w : encoder_.config().widths) {
    if (w > fixed_len_) throw DimensionError("filter width exceeds sequence length");
  }
}

Discriminator Discriminator::init_uniform(EncoderConfig cfg, std::size_t fixed_len,
                                          std::uint64_t seed, double scale) {
  Discriminator d(CnnEncoder::init_uniform(std::move(cfg), seed, scale), fixed_len);
  Rng rng = make_rng(seed, Stream::kDiscriminator);
  for (Tensor* t : {&d.w_cls, &d.b_cls})
    for (double& v : t->data()) v = (2.0 * uniform01(rng) - 1.0) * scale;
  return d;
}

std::vector<Tensor*> Discriminator::parameters() {
  auto out = encoder_.parameters();
  out.push_back(&w_cls);
  out.push_back(&b_cls);
  return out;
}

std::vector<const Tensor*> Discriminator::parameters() const {
  auto out = encoder_.parameters();
  out.push_back(&w_cls);
  out.push_back(&b_cls);
  return out;
}

Checkpoint Discriminator::to_checkpoint() const {
  Checkpoint c;
  c.kind = "discriminator";
  encoder_.write_to(c);
  c.set_field("fixed_len", fixed_len_);
  c.add_block("w_cls", w_cls);
  c.add_block("b_cls", b_cls);
  return c;
}

Discriminator Discriminator::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "discriminator") {
    throw FormatError("expected a discriminator checkpoint, got '" + ckpt.kind + "'");
  }
  Discriminator d(CnnEncoder::read_from(ckpt), ckpt.field("fixed_len"));
  const Tensor& w = ckpt.block("w_cls");
  const Tensor& b = ckpt.block("b_cls");
  if (w.shape() != d.w_cls.shape() || b.shape() != d.b_cls.shape()) {
    throw FormatError("classifier block shapes do not match the encoder");
  }
  d.w_cls = w;
  d.b_cls = b;
  return d;
}

bool operator==(const Discriminator& a, const Discriminator& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!(*pa[i] == *pb[i])) return false;
  return true;
}

Var discriminator_log_probs(Tape& tape, const Discriminator& disc, const EncoderVars& enc,
                            Var w_cls, Var b_cls, std::span<const int> ids, std::size_t count) {
  Var feats = encode_sequences(tape, enc, disc.encoder().config(), ids, count, disc.fixed_len());
  Var ones = tape.constant(Tensor({count, 1}, 1.0));
  Var logits = ops::add(ops::matmul(feats, w_cls), ops::matmul(ones, b_cls));
  return ops::log_softmax(logits, 1);
}

std::vector<double> Discriminator::prob_real(std::span<const int> ids, std::size_t count) const {
  if (count == 0) return {};
  if (ids.size() != count * fixed_len_) throw UsageError("discriminator input length mismatch");
  Tape tape;
  EncoderVars enc = EncoderVars::on(tape, encoder_, false);
  Var lp = discriminator_log_probs(tape, *this, enc, tape.constant(w_cls), tape.constant(b_cls),
                                   ids, count);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = std::exp(lp.value()[i * 2 + 1]);
  return out;
}

double discriminator_step(Discriminator& disc, std::span<const TokenSeq> human,
                          std::span<const TokenSeq> synthetic, const SgdConfig& cfg) {
  if (human.empty() || synthetic.empty()) throw UsageError("discriminator step needs both classes");
  const std::size_t len = disc.fixed_len();
  std::vector<int> ids = flatten(human, len);
  const std::vector<int> fake = flatten(synthetic, len);
  ids.insert(ids.end(), fake.begin(), fake.end());
  const std::size_t count = human.size() + synthetic.size();

  Tape tape;
  EncoderVars enc = EncoderVars::on(tape, disc.encoder(), true);
  Var w = tape.parameter(disc.w_cls);
  Var b = tape.parameter(disc.b_cls);
  Var lp = discriminator_log_probs(tape, disc, enc, w, b, ids, count);
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i * 2 + (i < human.size() ? 1 : 0);
  Var loss = ops::scale(ops::mean(ops::gather(lp, std::move(idx), {count})), -1.0);
  const double value = loss.value().item();
  if (!std::isfinite(value)) throw TrainingAborted("non-finite discriminator loss");
  Gradients grads = tape.backward(loss);
  auto params = disc.parameters();
  apply_sgd(params, grads, cfg);
  return value;
}

void DiscriminatorReward::score(std::span<const int> ids, std::size_t count, std::size_t len,
                                std::span<double> out) const {
  if (len != disc_.fixed_len()) throw UsageError("reward length differs from discriminator length");
  const auto p = disc_.prob_real(ids, count);
  std::copy(p.begin(), p.end(), out.begin());
}

}  // namespace rankgan
