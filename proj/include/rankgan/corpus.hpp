#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rankgan {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kReservedCount = 4;

// Token <-> id map. A thresholded vocabulary reserves ids 0..3 for
// PAD/BOS/EOS/UNK; an identity vocabulary (used for synthetic corpora) maps
// the surface form "k" to id k and reserves nothing.
class Vocab {
 public:
  // Counts whitespace-separated tokens; tokens seen fewer than `min_count`
  // times are left out and encode to UNK. Ids follow first occurrence order.
  static Vocab build(std::istream& lines, int min_count);
  static Vocab build(const std::vector<std::string>& lines, int min_count);
  static Vocab identity(std::size_t size);

  static Vocab load(std::istream& in);
  static Vocab load(const std::filesystem::path& path);
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  int min_count() const { return min_count_; }
  bool has_reserved() const { return reserved_; }

  // UNK for unknown tokens; identity vocabularies throw IngestionError instead.
  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.tokens_ == b.tokens_ && a.min_count_ == b.min_count_ &&
           a.reserved_ == b.reserved_;
  }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int min_count_ = 1;
  bool reserved_ = true;
};

// Fixed-length id sequence. `length` counts content tokens before EOS/padding.
struct TokenSeq {
  std::vector<int> ids;
  std::size_t length = 0;

  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

struct Corpus {
  std::vector<TokenSeq> seqs;
  std::shared_ptr<const Vocab> vocab;
  std::size_t fixed_len = 20;

  std::size_t size() const { return seqs.size(); }
};

std::vector<std::string> split_tokens(std::string_view line);

// Maps tokens to ids (unknown -> UNK), truncating to `fixed_len` or appending
// EOS and then PAD up to it.
TokenSeq encode(const Vocab& vocab, std::string_view line, std::size_t fixed_len);
// Surface form of the content: stops at the first EOS and skips PAD/BOS when
// the vocabulary reserves them.
std::string decode(const Vocab& vocab, const TokenSeq& seq);
std::string decode(const Vocab& vocab, std::span<const int> ids);

Corpus load_corpus(const std::filesystem::path& path,
                   std::shared_ptr<const Vocab> vocab, std::size_t fixed_len);
std::vector<std::string> read_lines(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

// Seeded shuffle into (train, validation); train gets round(n * fraction)
// sequences, clamped so both parts are nonempty.
std::pair<Corpus, Corpus> split(const Corpus& corpus, std::uint64_t seed,
                                double train_fraction);

}  // namespace rankgan
