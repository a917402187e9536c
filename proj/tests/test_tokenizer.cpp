#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pbpe/error.hpp"
#include "pbpe/tokenizer.hpp"
#include "pbpe/trainer.hpp"
#include "test_util.hpp"

namespace pbpe {
namespace {

using Tokens = std::vector<Bytes>;

TokenizerModel example_model() {
  const std::vector<std::pair<Bytes, Bytes>> merges{{"b", "a"}, {"ba", "b"}};
  return TokenizerModel::from_merges(merges);
}

// A model with a few hundred merges learned from a small multilingual corpus.
const TokenizerModel& trained_model() {
  static const TokenizerModel model = [] {
    const auto corpus = to_labeled_corpus(render_synthetic(default_synthetic_spec({0.6, 0.3, 0.1}, 60'000, 10), 4));
    return train_classical(corpus, 300).model;
  }();
  return model;
}

TEST(Encode, WorkedExample) {
  const TokenizerModel m = example_model();
  EXPECT_EQ(m.encode("babab"), (Tokens{"ba", "bab"}));
  EXPECT_EQ(m.token_count("babab"), 2u);
  const Tokens toks{"ba", "bab"};
  EXPECT_EQ(m.decode(toks), "babab");
}

TEST(Encode, IdentityModel) {
  const TokenizerModel m;
  EXPECT_EQ(m.encode("ab"), (Tokens{"a", "b"}));
  EXPECT_TRUE(m.encode("").empty());
  EXPECT_EQ(m.token_count(""), 0u);
  EXPECT_EQ(m.vocab_size(), 256u);
  EXPECT_EQ(m.decode(Tokens{}), "");
}

TEST(Encode, MergesStayInsidePretokens) {
  const std::vector<std::pair<Bytes, Bytes>> merges{{"b", " "}, {"a", "b"}};
  const TokenizerModel m = TokenizerModel::from_merges(merges);
  EXPECT_EQ(m.encode("ab ab"), (Tokens{"ab", " ", "ab"}));
}

TEST(Encode, SelfOverlappingPairs) {
  const std::vector<std::pair<Bytes, Bytes>> merges{{"a", "a"}};
  const TokenizerModel m = TokenizerModel::from_merges(merges);
  EXPECT_EQ(m.encode("aaa"), (Tokens{"aa", "a"}));
  EXPECT_EQ(m.encode("aaaa"), (Tokens{"aa", "aa"}));
  EXPECT_EQ(m.encode("aaaaa"), (Tokens{"aa", "aa", "a"}));
}

TEST(Encode, DuplicateResultsFollowListOrder) {
  // "abc" is produced by merges 2 and 4; both map to one vocabulary entry.
  const std::vector<std::pair<Bytes, Bytes>> merges{
      {"a", "b"}, {"ab", "c"}, {"b", "c"}, {"a", "bc"}, {"abc", "d"}};
  const TokenizerModel m = TokenizerModel::from_merges(merges);
  EXPECT_EQ(m.vocab_size(), 256u + 4u);
  EXPECT_EQ(m.num_ids(), 256u + 5u);
  std::vector<oracle::Pair> list(merges.begin(), merges.end());
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const auto n = rng() % 12;
    for (std::size_t k = 0; k < n; ++k) s += "abcd "[rng() % 5];
    ASSERT_EQ(m.encode(s), oracle::replay_encode(list, s)) << s;
  }
}

TEST(Encode, MatchesSequentialReplayOnTrainedModel) {
  const TokenizerModel& m = trained_model();
  const auto list = m.merge_pairs();
  const std::vector<oracle::Pair> pairs(list.begin(), list.end());
  const auto corpus = render_synthetic(default_synthetic_spec({0.6, 0.3, 0.1}, 20'000, 50), 99);
  for (const auto& lines : corpus.dev) {
    for (const auto& line : lines) ASSERT_EQ(m.encode(line), oracle::replay_encode(pairs, line));
  }
}

TEST(Encode, TokenCountMatchesEncodeOnFuzz) {
  const TokenizerModel& m = trained_model();
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    const std::string s = oracle::random_bytes(rng, 128);
    ASSERT_EQ(m.token_count(s), m.encode(s).size());
  }
}

TEST(Encode, LosslessOnRandomBytes) {
  const TokenizerModel& m = trained_model();
  std::mt19937_64 rng(23);
  for (int i = 0; i < 1000; ++i) {
    const std::string s = oracle::random_bytes(rng, 64);
    const Tokens toks = m.encode(s);
    ASSERT_EQ(m.decode(toks), s);
    ASSERT_EQ(m.decode_ids(m.encode_ids(s)), s);
  }
}

TEST(Encode, LongerPrefixesNeverAddTokens) {
  const TokenizerModel& m = trained_model();
  const auto corpus = render_synthetic(default_synthetic_spec({0.6, 0.3, 0.1}, 20'000, 5), 3);
  const std::string text = corpus.dev[0][0] + " " + corpus.dev[1][0] + " " + corpus.dev[2][0];
  std::size_t prev = m.prefix(0).token_count(text);
  for (std::size_t k = 1; k <= m.num_merges(); k += 7) {
    const std::size_t now = m.prefix(k).token_count(text);
    ASSERT_LE(now, prev) << "prefix " << k;
    prev = now;
  }
}

TEST(Decode, RejectsUnknownTokens) {
  const TokenizerModel m = example_model();
  EXPECT_THAT_THROWS(m.decode(Tokens{"ba", "zz"}), DataError, "'zz'");
  const std::vector<TokenId> ids{98, 999};
  EXPECT_THAT_THROWS(m.decode_ids(ids), DataError, "999");
}

TEST(Model, ValidatesMergeList) {
  const std::vector<std::pair<Bytes, Bytes>> unknown{{"ab", "c"}};
  EXPECT_THAT_THROWS(TokenizerModel::from_merges(unknown), DataError, "'ab'");
  const std::vector<std::pair<Bytes, Bytes>> dup{{"a", "b"}, {"a", "b"}};
  EXPECT_THAT_THROWS(TokenizerModel::from_merges(dup), DataError, "repeats");
}

TEST(Escape, RoundTripsAllBytes) {
  std::string all;
  for (int b = 0; b < 256; ++b) all += static_cast<char>(b);
  const std::string esc = escape_bytes(all);
  EXPECT_EQ(esc.find_first_of(" \t\n"), std::string::npos);
  EXPECT_EQ(unescape_bytes(esc), all);
  EXPECT_EQ(escape_bytes(" a\\"), "\\x20a\\\\");
  EXPECT_FALSE(unescape_bytes("\\x2").has_value());
  EXPECT_FALSE(unescape_bytes("\\q").has_value());
  EXPECT_FALSE(unescape_bytes("a b").has_value());
}

TEST(Serialization, FormatAndRoundTrip) {
  const TokenizerModel m = example_model();
  EXPECT_EQ(serialize_model(m), "parity-bpe v1\nmerges:\nb\ta\nba\tb\n");
  EXPECT_EQ(serialize_model(parse_model(serialize_model(TokenizerModel()))), "parity-bpe v1\nmerges:\n");

  const TokenizerModel& trained = trained_model();
  const auto dir = test::fresh_dir("tokenizer");
  save_model(trained, dir / "m.txt");
  const TokenizerModel loaded = load_model(dir / "m.txt");
  EXPECT_EQ(loaded.merge_pairs(), trained.merge_pairs());
  std::mt19937_64 rng(31);
  for (int i = 0; i < 500; ++i) {
    const std::string s = oracle::random_bytes(rng, 96);
    ASSERT_EQ(loaded.encode_ids(s), trained.encode_ids(s));
  }
}

TEST(Serialization, RejectsBadFiles) {
  EXPECT_THAT_THROWS(parse_model("parity-bpe v2\nmerges:\n"), DataError, "unsupported model format");
  EXPECT_THAT_THROWS(parse_model("parity-bpe v1\n"), DataError, "merges:");
  EXPECT_THAT_THROWS(parse_model("parity-bpe v1\nmerges:\na b\n"), DataError, "line 3");
  EXPECT_THAT_THROWS(parse_model("parity-bpe v1\nmerges:\nab\tc\n"), DataError, "neither a byte");
}

}  // namespace
}  // namespace pbpe
