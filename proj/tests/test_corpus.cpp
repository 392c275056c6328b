#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "rankgan/corpus.hpp"
#include "rankgan/error.hpp"
#include "support.hpp"

using namespace rankgan;
using namespace rankgan::testing;

TEST_CASE("vocabulary thresholds on min_count and keeps first-occurrence order") {
  const std::vector<std::string> lines = {"the cat sat", "the dog sat", "a cat"};
  const Vocab v = Vocab::build(lines, 2);
  CHECK(v.has_reserved());
  CHECK(v.size() == 4 + 3);  // the, cat, sat
  CHECK(v.id("the") == 4);
  CHECK(v.id("cat") == 5);
  CHECK(v.id("sat") == 6);
  CHECK(v.id("dog") == kUnk);
  CHECK(v.token(kEos) == "<eos>");
  CHECK_FALSE(v.contains("a"));
}

TEST_CASE("vocabulary construction errors") {
  CHECK_THROWS_AS(Vocab::build(std::vector<std::string>{}, 1), IngestionError);
  CHECK_THROWS_AS(Vocab::build(std::vector<std::string>{"a"}, 0), IngestionError);
  CHECK_THROWS_AS(Vocab::identity(3).id("7"), IngestionError);
  CHECK_THROWS_AS(Vocab::identity(3).token(3), UsageError);
}

TEST_CASE("encode pads with EOS then PAD, truncates long lines, and decode inverts it") {
  const Vocab v = Vocab::build(std::vector<std::string>{"a b c d e f"}, 1);
  const TokenSeq s = encode(v, "a b c", 6);
  CHECK(s.length == 3);
  CHECK(s.ids == std::vector<int>{v.id("a"), v.id("b"), v.id("c"), kEos, kPad, kPad});
  CHECK(decode(v, s) == "a b c");
  const TokenSeq t = encode(v, "a b c d e f", 4);
  CHECK(t.length == 4);
  CHECK(decode(v, t) == "a b c d");
  CHECK(decode(v, encode(v, "a zz b", 5)) == "a <unk> b");
}

TEST_CASE("identity vocabulary round-trips integer surface forms") {
  const Vocab v = Vocab::identity(10);
  CHECK_FALSE(v.has_reserved());
  const TokenSeq s = encode(v, "0 2 9 1", 4);
  CHECK(s.ids == std::vector<int>{0, 2, 9, 1});
  CHECK(decode(v, s) == "0 2 9 1");
  CHECK_THROWS_AS(encode(v, "1 2", 4), IngestionError);
}

TEST_CASE("vocabulary save/load is lossless for both kinds") {
  for (const Vocab& v : {Vocab::build(std::vector<std::string>{"x y x z"}, 1), Vocab::identity(7)}) {
    std::stringstream buf;
    v.save(buf);
    CHECK(Vocab::load(buf) == v);
  }
  std::stringstream bad("not a vocab\n");
  CHECK_THROWS_AS(Vocab::load(bad), FormatError);
}

TEST_CASE("corpus files round-trip through save and load") {
  const auto dir = scratch_dir("corpus");
  {
    std::ofstream out(dir / "c.txt");
    out << "the cat sat\n\n  a dog ran far away today\nthe end\n";
  }
  auto vocab = std::make_shared<const Vocab>(Vocab::build(read_lines(dir / "c.txt"), 1));
  const Corpus c = load_corpus(dir / "c.txt", vocab, 5);
  CHECK(c.size() == 3);  // blank line skipped
  save_corpus(dir / "d.txt", c);
  const Corpus d = load_corpus(dir / "d.txt", vocab, 5);
  REQUIRE(d.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(d.seqs[i] == c.seqs[i]);
  CHECK_THROWS_AS(load_corpus(dir / "missing.txt", vocab, 5), IngestionError);
}

TEST_CASE("split partitions the corpus deterministically") {
  std::vector<std::vector<int>> rows;
  for (int i = 0; i < 50; ++i) rows.push_back({i % 7, i % 5, i});
  const Corpus c = identity_corpus(rows, 50);
  auto [train, valid] = split(c, 9, 0.8);
  CHECK(train.size() == 40);
  CHECK(valid.size() == 10);
  std::multiset<int> seen;
  for (const auto& s : train.seqs) seen.insert(s.ids[2]);
  for (const auto& s : valid.seqs) seen.insert(s.ids[2]);
  CHECK(seen.size() == 50);
  CHECK(std::set<int>(seen.begin(), seen.end()).size() == 50);
  auto [train2, valid2] = split(c, 9, 0.8);
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(train.seqs[i] == train2.seqs[i]);
  auto [train3, valid3] = split(c, 10, 0.8);
  bool differs = false;
  for (std::size_t i = 0; i < train.size(); ++i) differs |= !(train.seqs[i] == train3.seqs[i]);
  CHECK(differs);
}

TEST_CASE("split errors") {
  const Corpus one = identity_corpus({{1, 2}}, 3);
  CHECK_THROWS_AS(split(one, 1, 0.5), SplitError);
  const Corpus two = identity_corpus({{1, 2}, {2, 1}}, 3);
  CHECK_THROWS_AS(split(two, 1, 0.0), SplitError);
  CHECK_THROWS_AS(split(two, 1, 1.0), SplitError);
  auto [t, v] = split(two, 1, 0.99);  // clamped so both sides are nonempty
  CHECK(t.size() == 1);
  CHECK(v.size() == 1);
}
