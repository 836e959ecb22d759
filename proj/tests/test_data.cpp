// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "seqtag/data.hpp"
#include "seqtag/errors.hpp"
#include "seqtag/layers.hpp"

using namespace seqtag;

namespace {

std::vector<TaggedSentence> random_corpus(Rng& rng, std::size_t max_sentences) {
  static const std::string alphabet = "abcdefXYZ019-._/:";
  std::uniform_int_distribution<std::size_t> n(0, max_sentences), len(1, 9), wlen(1, 6),
      ch(0, alphabet.size() - 1), tag(0, 4);
  std::vector<TaggedSentence> out(n(rng));
  for (auto& s : out) {
    const std::size_t l = len(rng);
    for (std::size_t i = 0; i < l; ++i) {
      std::string w;
      for (std::size_t c = wlen(rng); c > 0; --c) w += alphabet[ch(rng)];
      s.tokens.push_back(w);
      const std::size_t t = tag(rng);
      s.tags.push_back(t == 0 ? "O" : "ent" + std::to_string(t));
    }
  }
  return out;
}

std::vector<TaggedSentence> sorted(std::vector<TaggedSentence> v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return std::tie(a.tokens, a.tags) < std::tie(b.tokens, b.tags);
  });
  return v;
}

}  // namespace

TEST_CASE("CoNLL format") {
  const std::vector<TaggedSentence> s{{{"DDoS", "attack"}, {"O", "O"}}};
  CHECK(write_conll(s) == "DDoS O\nattack O\n\n");
  CHECK(parse_conll("").empty());
  CHECK(parse_conll("a X\r\nb Y\r\n\r\nc Z\n\n\n\n") ==
        std::vector<TaggedSentence>{{{"a", "b"}, {"X", "Y"}}, {{"c"}, {"Z"}}});
  CHECK(parse_conll("a X") == std::vector<TaggedSentence>{{{"a"}, {"X"}}});
  try {
    parse_conll("a X\nb\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_conll("a X extra\n"), ParseError);
  CHECK_THROWS_AS(write_conll({{{"has space"}, {"O"}}}), DataError);
}

TEST_CASE("CoNLL round trip on random corpora") {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const auto corpus = random_corpus(rng, 8);
    const std::string text = write_conll(corpus);
    CHECK(parse_conll(text) == corpus);
    if (!corpus.empty()) CHECK(text.back() == '\n');
  }
}

TEST_CASE("build_vocab") {
  const std::vector<TaggedSentence> corpus{{{"a", "a", "b"}, {"X", "X", "Y"}}};
  const Vocabulary v = build_vocab(corpus);
  CHECK(v.token_id("<pad>") == 0);
  CHECK(v.token_id("<unk>") == 1);
  CHECK(v.token_id("a") == 2);
  CHECK(v.token_id("b") == 3);
  CHECK(v.token_id("zzz") == kUnkId);
  CHECK(v.tags() == std::vector<std::string>{"X", "Y"});

  const Vocabulary v2 = build_vocab(corpus, 2);
  CHECK(v2.token_id("a") == 2);
  CHECK(v2.token_id("b") == kUnkId);

  // Frequency ties break lexicographically.
  const Vocabulary v3 = build_vocab({{{"d", "c", "b", "b"}, {"O", "O", "O", "O"}}});
  CHECK(v3.tokens() == std::vector<std::string>{"<pad>", "<unk>", "b", "c", "d"});

  CHECK_THROWS_AS(build_vocab({}), ArgumentError);
  try {
    v.tag_id("Z");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("'Z'") != std::string::npos);
  }

  Rng rng(2);
  const auto corpus2 = random_corpus(rng, 40);
  if (!corpus2.empty()) {
    const Vocabulary v4 = build_vocab(corpus2);
    std::map<std::string, bool> seen;
    for (const auto& s : corpus2)
      for (const auto& t : s.tags) seen[t] = true;
    CHECK(v4.tag_count() == seen.size());
    for (std::size_t i = 0; i < v4.tag_count(); ++i) CHECK(v4.tag_id(v4.tag(i)) == i);
  }
}

TEST_CASE("convert_json_corpus") {
  SUBCASE("single sentence") {
    const auto out = convert_json_corpus(R"({"nvd": [[{"text": "Microsoft", "entity": "vendor"},
                                                      {"text": "Windows", "entity": "application"}]]})");
    REQUIRE(out.size() == 1);
    CHECK(out[0].tokens == std::vector<std::string>{"Microsoft", "Windows"});
    CHECK(out[0].tags == std::vector<std::string>{"vendor", "application"});
  }
  SUBCASE("missing or null annotation becomes O") {
    const auto out = convert_json_corpus(
        R"({"c": [[{"text": "a", "entity": null}, {"text": "b"}, {"word": "c", "label": ""}]]})");
    REQUIRE(out.size() == 1);
    CHECK(out[0].tags == std::vector<std::string>{"O", "O", "O"});
  }
  SUBCASE("corpora concatenate in document order") {
    const auto out = convert_json_corpus(R"({
      "zeta": [[{"text": "z1"}], [{"text": "z2"}]],
      "alpha": {"sentences": [{"words": [{"text": "a1"}]}], "source": "ignored"},
      "mid": [[{"text": "m1"}], [{"text": "m2"}], [{"text": "m3"}]]
    })");
    REQUIRE(out.size() == 6);
    CHECK(out[0].tokens[0] == "z1");
    CHECK(out[2].tokens[0] == "a1");
    CHECK(out[5].tokens[0] == "m3");
  }
  SUBCASE("array of corpora, whitespace split, empty sentences dropped") {
    const auto out = convert_json_corpus(
        R"([[[{"token": "Windows XP", "type": "application", "extra": 1}], []]])");
    REQUIRE(out.size() == 1);
    CHECK(out[0].tokens == std::vector<std::string>{"Windows", "XP"});
    CHECK(out[0].tags == std::vector<std::string>{"application", "application"});
  }
  SUBCASE("errors name the element") {
    try {
      convert_json_corpus(R"({"c": [[{"text": "a"}, {"entity": "x"}]]})");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(R"($["c"][0][1])") != std::string::npos);
    }
    try {
      convert_json_corpus(R"({"c": [[{"text": "a"}], 5]})");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(R"($["c"][1])") != std::string::npos);
    }
    CHECK_THROWS_AS(convert_json_corpus("{not json"), ParseError);
    CHECK_THROWS_AS(convert_json_corpus("42"), ParseError);
  }
  SUBCASE("output sentences satisfy the invariants") {
    const auto out = convert_json_corpus(
        R"({"c": [[{"text": " padded\ttext "}, {"text": "x", "entity": "vendor"}], []]})");
    for (const auto& s : out) CHECK_NOTHROW(validate(s));
  }
}

TEST_CASE("split_dataset") {
  Rng rng(3);
  std::vector<TaggedSentence> ten;
  for (int i = 0; i < 10; ++i) ten.push_back({{"t" + std::to_string(i)}, {"O"}});
  const auto s = split_dataset(ten, SplitSpec{});
  CHECK(s.train.size() == 7);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 2);

  std::vector<TaggedSentence> all = s.train;
  all.insert(all.end(), s.val.begin(), s.val.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  CHECK(sorted(all) == sorted(ten));

  const auto again = split_dataset(ten, SplitSpec{});
  CHECK(again.train == s.train);
  SplitSpec other;
  other.seed = 999;
  std::vector<TaggedSentence> big;
  for (int i = 0; i < 200; ++i) big.push_back({{"t" + std::to_string(i)}, {"O"}});
  CHECK(split_dataset(big, other).train != split_dataset(big, SplitSpec{}).train);

  CHECK_THROWS_AS(split_dataset({ten[0], ten[1]}, SplitSpec{}), ArgumentError);
  SplitSpec bad;
  bad.test = 0.5;
  CHECK_THROWS_AS(split_dataset(ten, bad), ArgumentError);
}

TEST_CASE("synthetic corpus") {
  const auto corpus = generate_synthetic_corpus(7, 300, 100, 5);
  CHECK(corpus.size() == 300);
  for (const auto& s : corpus) {
    CHECK_NOTHROW(validate(s));
    CHECK(s.tokens.size() >= 3);
    CHECK(s.tokens.size() <= 12);
    for (std::size_t i = 0; i < s.tokens.size(); ++i) CHECK(synthetic_tag_of(s.tokens[i]) == s.tags[i]);
  }
  CHECK(generate_synthetic_corpus(7, 300, 100, 5) == corpus);
  CHECK(generate_synthetic_corpus(8, 300, 100, 5) != corpus);

  CHECK_THROWS_AS(generate_synthetic_corpus(1, 10, 100, 1), ArgumentError);
  CHECK_THROWS_AS(generate_synthetic_corpus(1, 10, 3, 5), ArgumentError);
  CHECK_THROWS_AS(generate_synthetic_corpus(1, 0, 100, 5), ArgumentError);
}

TEST_CASE("synthetic tag classes are close to uniform") {
  // Count tags over the first 10000 tokens and compare against the
  // chi-square critical value for 4 degrees of freedom at p = 0.001.
  const auto corpus = generate_synthetic_corpus(42, 2000, 100, 5);
  std::map<std::string, double> counts;
  std::size_t total = 0;
  for (const auto& s : corpus) {
    for (const auto& t : s.tags) {
      if (total == 10000) break;
      counts[t] += 1.0;
      ++total;
    }
  }
  REQUIRE(total == 10000);
  REQUIRE(counts.size() == 5);
  double chi2 = 0.0;
  for (const auto& [tag, c] : counts) chi2 += (c - 2000.0) * (c - 2000.0) / 2000.0;
  CHECK(chi2 < 18.467);
}
