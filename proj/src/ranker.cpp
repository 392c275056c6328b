#include "rankgan/ranker.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "rankgan/checkpoint.hpp"
#include "rankgan/error.hpp"
#include "rankgan/rng.hpp"

namespace rankgan {
namespace {

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

std::vector<double> normalized(std::span<const double> y) {
  double sq = 0.0;
  for (double v : y) sq += v * v;
  const double n = std::sqrt(sq);
  if (n == 0.0) throw DegenerateFeatureError("feature vector has zero norm");
  std::vector<double> out(y.begin(), y.end());
  for (double& v : out) v /= n;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::vector<int> flat_ids(const std::vector<TokenSeq>& seqs, std::size_t len) {
  std::vector<int> ids;
  ids.reserve(seqs.size() * len);
  for (const TokenSeq& s : seqs) {
    if (s.ids.size() != len) {
      throw UsageError("sequence of length " + std::to_string(s.ids.size()) +
                       " given to a ranker configured for length " + std::to_string(len));
    }
    ids.insert(ids.end(), s.ids.begin(), s.ids.end());
  }
  return ids;
}

}  // namespace

CnnEncoder::CnnEncoder(EncoderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.vocab == 0 || cfg_.embed == 0 || cfg_.widths.empty() || cfg_.filters_per_width == 0) {
    throw DimensionError("encoder dimensions must be positive");
  }
  embedding = Tensor({cfg_.vocab, cfg_.embed});
  for (std::size_t w : cfg_.widths) {
    if (w == 0) throw DimensionError("filter width must be positive");
    filters.emplace_back(Shape{cfg_.filters_per_width, w * cfg_.embed});
    biases.emplace_back(Shape{1, cfg_.filters_per_width});
  }
}

CnnEncoder CnnEncoder::init_uniform(EncoderConfig cfg, std::uint64_t seed, double scale) {
  CnnEncoder e(std::move(cfg));
  Rng rng = make_rng(seed, Stream::kInit, {0x7a6e6b});
  for (Tensor* p : e.parameters())
    for (double& v : p->data()) v = (2.0 * uniform01(rng) - 1.0) * scale;
  return e;
}

std::vector<Tensor*> CnnEncoder::parameters() {
  std::vector<Tensor*> out{&embedding};
  for (std::size_t i = 0; i < filters.size(); ++i) {
    out.push_back(&filters[i]);
    out.push_back(&biases[i]);
  }
  return out;
}

std::vector<const Tensor*> CnnEncoder::parameters() const {
  std::vector<const Tensor*> out{&embedding};
  for (std::size_t i = 0; i < filters.size(); ++i) {
    out.push_back(&filters[i]);
    out.push_back(&biases[i]);
  }
  return out;
}

std::vector<std::string> CnnEncoder::parameter_names() const {
  std::vector<std::string> out{"embedding"};
  for (std::size_t w : cfg_.widths) {
    out.push_back("conv_w" + std::to_string(w));
    out.push_back("conv_b" + std::to_string(w));
  }
  return out;
}

void CnnEncoder::write_to(Checkpoint& ckpt) const {
  ckpt.set_field("vocab_size", cfg_.vocab);
  ckpt.set_field("embed_dim", cfg_.embed);
  ckpt.set_field("filters_per_width", cfg_.filters_per_width);
  ckpt.set_field("activation", static_cast<std::uint64_t>(cfg_.activation));
  ckpt.set_field("num_widths", cfg_.widths.size());
  for (std::size_t i = 0; i < cfg_.widths.size(); ++i) {
    ckpt.set_field("width_" + std::to_string(i), cfg_.widths[i]);
  }
  const auto names = parameter_names();
  const auto params = parameters();
  for (std::size_t i = 0; i < params.size(); ++i) ckpt.add_block(names[i], *params[i]);
}

CnnEncoder CnnEncoder::read_from(const Checkpoint& ckpt) {
  EncoderConfig cfg;
  cfg.vocab = ckpt.field("vocab_size");
  cfg.embed = ckpt.field("embed_dim");
  cfg.filters_per_width = ckpt.field("filters_per_width");
  const auto act = ckpt.field("activation");
  if (act > static_cast<std::uint64_t>(ops::Activation::kRelu)) {
    throw FormatError("unknown activation code " + std::to_string(act));
  }
  cfg.activation = static_cast<ops::Activation>(act);
  cfg.widths.clear();
  const auto n = ckpt.field("num_widths");
  for (std::uint64_t i = 0; i < n; ++i) cfg.widths.push_back(ckpt.field("width_" + std::to_string(i)));
  CnnEncoder e(cfg);
  const auto names = e.parameter_names();
  auto params = e.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = ckpt.block(names[i]);
    if (t.shape() != params[i]->shape()) {
      throw FormatError("block '" + names[i] + "' has shape " + shape_string(t.shape()));
    }
    *params[i] = t;
  }
  return e;
}

EncoderVars EncoderVars::on(Tape& tape, const CnnEncoder& enc, bool trainable) {
  auto leaf = [&](const Tensor& t) { return trainable ? tape.parameter(t) : tape.constant(t); };
  EncoderVars v;
  v.embedding = leaf(enc.embedding);
  for (std::size_t i = 0; i < enc.filters.size(); ++i) {
    v.filters.push_back(leaf(enc.filters[i]));
    v.biases.push_back(leaf(enc.biases[i]));
  }
  return v;
}

Var encode_sequences(Tape& tape, const EncoderVars& vars, const EncoderConfig& cfg,
                     std::span<const int> ids, std::size_t count, std::size_t len) {
  if (ids.size() != count * len || count == 0) {
    throw DimensionError("encode_sequences: id buffer does not match [count, len]");
  }
  (void)tape;
  Var x = ops::reshape(ops::take_rows(vars.embedding, ids), {count, len, cfg.embed});
  std::vector<Var> pooled;
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    pooled.push_back(
        ops::conv1d_maxpool(x, vars.filters[i], vars.biases[i], cfg.widths[i], cfg.activation));
  }
  return pooled.size() == 1 ? pooled[0] : ops::concat_cols(pooled);
}

double FeatureVec::norm() const {
  double sq = 0.0;
  for (double v : y) sq += v * v;
  return std::sqrt(sq);
}

RankerModel::RankerModel(CnnEncoder encoder, double gamma, std::size_t fixed_len)
    : encoder_(std::move(encoder)), fixed_len_(fixed_len) {
  set_gamma(gamma);
  for (std::size_t w : encoder_.config().widths) {
    if (w > fixed_len_) {
      throw DimensionError("filter width " + std::to_string(w) + " exceeds sequence length " +
                           std::to_string(fixed_len_));
    }
  }
}

void RankerModel::set_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw UsageError("gamma must be positive");
  gamma_ = gamma;
}

Checkpoint RankerModel::to_checkpoint() const {
  Checkpoint c;
  c.kind = "ranker";
  encoder_.write_to(c);
  c.set_field("gamma_bits", std::bit_cast<std::uint64_t>(gamma_));
  c.set_field("fixed_len", fixed_len_);
  return c;
}

RankerModel RankerModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "ranker") throw FormatError("expected a ranker checkpoint, got '" + ckpt.kind + "'");
  return RankerModel(CnnEncoder::read_from(ckpt), std::bit_cast<double>(ckpt.field("gamma_bits")),
                     ckpt.field("fixed_len"));
}

bool operator==(const RankerModel& a, const RankerModel& b) {
  if (a.gamma() != b.gamma() || a.fixed_len() != b.fixed_len()) return false;
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!(*pa[i] == *pb[i])) return false;
  return true;
}

std::vector<double> RankerModel::encode_rows(std::span<const int> ids, std::size_t count) const {
  if (count == 0) return {};
  if (ids.size() != count * fixed_len_) {
    throw UsageError("ranker input length differs from configured fixed length " +
                     std::to_string(fixed_len_));
  }
  Tape tape;
  EncoderVars vars = EncoderVars::on(tape, encoder_, false);
  Var f = encode_sequences(tape, vars, encoder_.config(), ids, count, fixed_len_);
  return f.value().storage();
}

FeatureVec encode(const RankerModel& ranker, const TokenSeq& seq) {
  if (seq.ids.size() != ranker.fixed_len()) {
    throw UsageError("sequence of length " + std::to_string(seq.ids.size()) +
                     " given to a ranker configured for length " +
                     std::to_string(ranker.fixed_len()));
  }
  return {ranker.encode_rows(seq.ids, 1)};
}

double relevance(const FeatureVec& ys, const FeatureVec& yu) {
  if (ys.y.size() != yu.y.size()) throw DimensionError("feature dimensions differ");
  const double ns = ys.norm(), nu = yu.norm();
  if (ns == 0.0 || nu == 0.0) throw DegenerateFeatureError("relevance of a zero-norm feature");
  return std::clamp(dot(ys.y, yu.y) / (ns * nu), -1.0, 1.0);
}

double rank_score_from_relevances(double alpha_s, std::span<const double> alpha_others,
                                  double gamma, double shift) {
  const double es = gamma * alpha_s + shift;
  double lse = es;
  for (double a : alpha_others) lse = log_add_exp(lse, gamma * a + shift);
  return std::exp(es - lse);
}

double rank_score(const TokenSeq& s, const TokenSeq& u, const ComparisonSet& c,
                  const RankerModel& ranker) {
  const FeatureVec yu = encode(ranker, u);
  const double as = relevance(encode(ranker, s), yu);
  std::vector<double> others;
  for (const TokenSeq& cs : c.sentences) others.push_back(relevance(encode(ranker, cs), yu));
  return rank_score_from_relevances(as, others, ranker.gamma());
}

double expected_rank(const TokenSeq& s, const ReferenceSet& u, const ComparisonSet& c,
                     const RankerModel& ranker) {
  if (u.sentences.empty()) throw UsageError("reference set is empty");
  double acc = 0.0;
  for (const TokenSeq& ref : u.sentences) acc += rank_score(s, ref, c, ranker);
  return acc / static_cast<double>(u.sentences.size());
}

RankContext::RankContext(const RankerModel& ranker, const ReferenceSet& refs,
                         const ComparisonSet& comps)
    : gamma_(ranker.gamma()),
      dim_(ranker.encoder().feature_dim()),
      ref_count_(refs.sentences.size()),
      version_(ranker.version()) {
  if (refs.sentences.empty()) throw UsageError("reference set is empty");
  const std::size_t len = ranker.fixed_len();
  const auto ref_feats = ranker.encode_rows(flat_ids(refs.sentences, len), ref_count_);
  for (std::size_t u = 0; u < ref_count_; ++u) {
    const auto n = normalized(std::span(ref_feats).subspan(u * dim_, dim_));
    refs_.insert(refs_.end(), n.begin(), n.end());
  }
  comp_lse_.assign(ref_count_, -std::numeric_limits<double>::infinity());
  const std::size_t nc = comps.sentences.size();
  if (nc == 0) return;
  const auto comp_feats = ranker.encode_rows(flat_ids(comps.sentences, len), nc);
  for (std::size_t k = 0; k < nc; ++k) {
    const auto zc = normalized(std::span(comp_feats).subspan(k * dim_, dim_));
    for (std::size_t u = 0; u < ref_count_; ++u) {
      const double a = dot(zc, std::span(refs_).subspan(u * dim_, dim_));
      comp_lse_[u] = log_add_exp(comp_lse_[u], gamma_ * a);
    }
  }
}

double RankContext::rank_score(std::span<const double> feature, std::size_t ref) const {
  if (feature.size() != dim_) throw DimensionError("feature dimension mismatch");
  const auto z = normalized(feature);
  const double a = gamma_ * dot(z, std::span(refs_).subspan(ref * dim_, dim_));
  return std::exp(a - log_add_exp(a, comp_lse_[ref]));
}

double RankContext::expected_rank(std::span<const double> feature) const {
  double acc = 0.0;
  for (std::size_t u = 0; u < ref_count_; ++u) acc += rank_score(feature, u);
  return acc / static_cast<double>(ref_count_);
}

RankReward::RankReward(const RankerModel& ranker, const ReferenceSet& refs,
                       const ComparisonSet& comps)
    : ranker_(ranker), context_(ranker, refs, comps) {}

void RankReward::score(std::span<const int> ids, std::size_t count, std::size_t len,
                       std::span<double> out) const {
  if (ranker_.version() != context_.version()) {
    throw UsageError("ranker changed since its reference features were cached");
  }
  if (len != ranker_.fixed_len()) throw UsageError("reward length differs from ranker length");
  const auto feats = ranker_.encode_rows(ids, count);
  const std::size_t dim = ranker_.encoder().feature_dim();
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = context_.expected_rank(std::span(feats).subspan(i * dim, dim));
  }
}

Var log_expected_rank(Tape& tape, const EncoderVars& vars, const RankerModel& ranker,
                      std::span<const int> inputs, std::size_t count, std::span<const int> refs,
                      std::size_t ref_count, std::span<const int> comps, std::size_t comp_count) {
  const auto& cfg = ranker.encoder().config();
  const std::size_t len = ranker.fixed_len();
  if (ref_count == 0) throw UsageError("reference set is empty");
  Var zi = ops::normalize_rows(encode_sequences(tape, vars, cfg, inputs, count, len));
  Var zu_t = ops::transpose(
      ops::normalize_rows(encode_sequences(tape, vars, cfg, refs, ref_count, len)));
  std::vector<Var> rel{ops::matmul(zi, zu_t)};
  if (comp_count > 0) {
    Var zc = ops::normalize_rows(encode_sequences(tape, vars, cfg, comps, comp_count, len));
    rel.push_back(ops::matmul(zc, zu_t));
  }
  // scaled relevances, rows = inputs then comparison sentences, cols = references
  Var scaled = ops::scale(rel.size() == 1 ? rel[0] : ops::concat_rows(rel), ranker.gamma());

  // One softmax row per (input, reference) over C' = {input} + C; the input sits in column 0.
  const std::size_t width = 1 + comp_count;
  std::vector<std::size_t> idx;
  idx.reserve(count * ref_count * width);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t u = 0; u < ref_count; ++u) {
      idx.push_back(i * ref_count + u);
      for (std::size_t k = 0; k < comp_count; ++k) idx.push_back((count + k) * ref_count + u);
    }
  }
  Var logits = ops::gather(scaled, std::move(idx), {count * ref_count, width});
  Var logp_all = ops::log_softmax(logits, 1);
  std::vector<std::size_t> pick(count * ref_count);
  for (std::size_t r = 0; r < pick.size(); ++r) pick[r] = r * width;
  Var logp = ops::gather(logp_all, std::move(pick), {count, ref_count});
  if (ref_count == 1) return ops::reshape(logp, {count});
  Var mean_p = ops::scale(ops::sum_axis(ops::exp(logp), 1), 1.0 / static_cast<double>(ref_count));
  return ops::log(mean_p);
}

}  // namespace rankgan
