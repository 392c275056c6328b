#include "rankgan/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "rankgan/error.hpp"
#include "rankgan/rng.hpp"

namespace rankgan {
namespace {

constexpr const char* kReservedForms[kReservedCount] = {"<pad>", "<bos>", "<eos>", "<unk>"};
constexpr std::string_view kVocabHeader = "#vocab";

}  // namespace

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
  };
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

void Vocab::add(std::string token) {
  const int id = static_cast<int>(tokens_.size());
  index_.emplace(token, id);
  tokens_.push_back(std::move(token));
}

Vocab Vocab::build(const std::vector<std::string>& lines, int min_count) {
  if (min_count < 1) throw IngestionError("min_count must be at least 1");
  if (lines.empty()) throw IngestionError("cannot build a vocabulary from an empty stream");
  std::unordered_map<std::string, int> counts;
  std::vector<std::string> order;
  for (const std::string& line : lines) {
    for (std::string& tok : split_tokens(line)) {
      auto [it, inserted] = counts.try_emplace(tok, 0);
      if (inserted) order.push_back(std::move(tok));
      ++it->second;
    }
  }
  Vocab v;
  v.min_count_ = min_count;
  v.reserved_ = true;
  for (const char* form : kReservedForms) v.add(form);
  for (std::string& tok : order) {
    if (counts[tok] >= min_count && !v.index_.count(tok)) v.add(std::move(tok));
  }
  return v;
}

Vocab Vocab::build(std::istream& lines, int min_count) {
  std::vector<std::string> all;
  for (std::string line; std::getline(lines, line);) all.push_back(std::move(line));
  return build(all, min_count);
}

Vocab Vocab::identity(std::size_t size) {
  Vocab v;
  v.reserved_ = false;
  v.min_count_ = 1;
  for (std::size_t i = 0; i < size; ++i) v.add(std::to_string(i));
  return v;
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it != index_.end()) return it->second;
  if (!reserved_) {
    throw IngestionError("token '" + std::string(token) +
                         "' is not in the identity vocabulary");
  }
  return kUnk;
}

bool Vocab::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw UsageError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

// Header: "#vocab min_count=<k> reserved=<0|4>", then one token per line for
// ids from `reserved` upward.
void Vocab::save(std::ostream& out) const {
  const int reserved = reserved_ ? kReservedCount : 0;
  out << kVocabHeader << " min_count=" << min_count_ << " reserved=" << reserved << '\n';
  for (std::size_t i = static_cast<std::size_t>(reserved); i < tokens_.size(); ++i) {
    out << tokens_[i] << '\n';
  }
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write vocabulary " + path.string());
  save(out);
}

Vocab Vocab::load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw FormatError("vocabulary file is empty");
  std::istringstream hs(header);
  std::string tag, mc, rs;
  hs >> tag >> mc >> rs;
  int min_count = 0, reserved = -1;
  if (tag != kVocabHeader || std::sscanf(mc.c_str(), "min_count=%d", &min_count) != 1 ||
      std::sscanf(rs.c_str(), "reserved=%d", &reserved) != 1 ||
      (reserved != 0 && reserved != kReservedCount) || min_count < 1) {
    throw FormatError("malformed vocabulary header: '" + header + "'");
  }
  Vocab v;
  v.min_count_ = min_count;
  v.reserved_ = reserved == kReservedCount;
  if (v.reserved_) {
    for (const char* form : kReservedForms) v.add(form);
  }
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (v.index_.count(line)) throw FormatError("duplicate vocabulary token '" + line + "'");
    v.add(std::move(line));
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open vocabulary " + path.string());
  return load(in);
}

TokenSeq encode(const Vocab& vocab, std::string_view line, std::size_t fixed_len) {
  if (fixed_len < 1) throw UsageError("fixed_len must be at least 1");
  TokenSeq seq;
  seq.ids.reserve(fixed_len);
  for (const std::string& tok : split_tokens(line)) {
    if (seq.ids.size() == fixed_len) break;
    seq.ids.push_back(vocab.id(tok));
  }
  seq.length = seq.ids.size();
  if (seq.ids.size() < fixed_len && !vocab.has_reserved()) {
    // No EOS/PAD ids exist to fill the gap without aliasing real tokens.
    throw IngestionError("sequence of " + std::to_string(seq.ids.size()) +
                         " tokens is shorter than fixed length " + std::to_string(fixed_len) +
                         " and the identity vocabulary has no padding");
  }
  if (seq.ids.size() < fixed_len) seq.ids.push_back(kEos);
  seq.ids.resize(fixed_len, kPad);
  return seq;
}

std::string decode(const Vocab& vocab, std::span<const int> ids) {
  std::string out;
  for (int id : ids) {
    if (vocab.has_reserved()) {
      if (id == kEos) break;
      if (id == kPad || id == kBos) continue;
    }
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

std::string decode(const Vocab& vocab, const TokenSeq& seq) { return decode(vocab, seq.ids); }

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open corpus " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

Corpus load_corpus(const std::filesystem::path& path, std::shared_ptr<const Vocab> vocab,
                   std::size_t fixed_len) {
  Corpus c;
  c.vocab = std::move(vocab);
  c.fixed_len = fixed_len;
  for (const std::string& line : read_lines(path)) {
    if (split_tokens(line).empty()) continue;
    c.seqs.push_back(encode(*c.vocab, line, fixed_len));
  }
  if (c.seqs.empty()) throw IngestionError("corpus " + path.string() + " has no sentences");
  return c;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write corpus " + path.string());
  for (const TokenSeq& s : corpus.seqs) out << decode(*corpus.vocab, s) << '\n';
  if (!out) throw IngestionError("write failed for corpus " + path.string());
}

std::pair<Corpus, Corpus> split(const Corpus& corpus, std::uint64_t seed,
                                double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw SplitError("train_fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = corpus.size();
  if (n < 2) throw SplitError("cannot split a corpus of fewer than 2 sequences");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng(seed, Stream::kSplit);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
    std::swap(order[i], order[std::min(j, i)]);
  }
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  Corpus train{{}, corpus.vocab, corpus.fixed_len};
  Corpus valid{{}, corpus.vocab, corpus.fixed_len};
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? train : valid).seqs.push_back(corpus.seqs[order[i]]);
  }
  return {std::move(train), std::move(valid)};
}

}  // namespace rankgan
