#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "pbpe/corpus.hpp"
#include "pbpe/error.hpp"
#include "test_util.hpp"

namespace pbpe {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> as_strings(const std::vector<BytesView>& v) { return {v.begin(), v.end()}; }

TEST(Pretokenize, LeadingSpaceConvention) {
  EXPECT_EQ(as_strings(pretokenize("ab cd")), (std::vector<std::string>{"ab", " cd"}));
  EXPECT_TRUE(pretokenize("").empty());
  EXPECT_EQ(as_strings(pretokenize("a  b")), (std::vector<std::string>{"a", "  b"}));
  EXPECT_EQ(as_strings(pretokenize("  x\ty ")), (std::vector<std::string>{"  x", "\ty", " "}));
  EXPECT_EQ(as_strings(pretokenize("\n")), (std::vector<std::string>{"\n"}));
}

TEST(Pretokenize, ReconstructsArbitraryBytes) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    std::string s = oracle::random_bytes(rng, 64);
    // Bias towards whitespace so that runs actually occur.
    for (char& c : s) {
      if (rng() % 4 == 0) c = " \t\n"[rng() % 3];
    }
    std::string joined;
    std::uint64_t bytes = 0;
    for (BytesView p : pretokenize(s)) {
      ASSERT_FALSE(p.empty());
      joined += p;
      bytes += p.size();
    }
    ASSERT_EQ(joined, s);
    ASSERT_EQ(bytes, unit_length(s, NormUnit::kBytes).value);
  }
}

TEST(UnitLength, Definitions) {
  EXPECT_EQ(unit_length("h\xc3\xa9llo", NormUnit::kBytes).value, 6u);
  EXPECT_EQ(unit_length("h\xc3\xa9llo", NormUnit::kChars).value, 5u);
  for (NormUnit u : kAllNormUnits) EXPECT_EQ(unit_length("", u).value, 0u);
  EXPECT_EQ(unit_length("ab  cd e", NormUnit::kWords).value, 3u);
  EXPECT_EQ(unit_length("trailing ", NormUnit::kWords).value, 1u);
  EXPECT_EQ(unit_length("one record", NormUnit::kLines).value, 1u);
}

TEST(UnitLength, InvalidUtf8FallsBackToBytes) {
  const UnitCount c = unit_length("ab\xff", NormUnit::kChars);
  EXPECT_EQ(c.value, 3u);
  EXPECT_TRUE(c.utf8_fallback);
  EXPECT_FALSE(unit_length("abc", NormUnit::kChars).utf8_fallback);
  // overlong encoding of '/'
  EXPECT_TRUE(unit_length("\xc0\xaf", NormUnit::kChars).utf8_fallback);
  // surrogate half
  EXPECT_TRUE(unit_length("\xed\xa0\x80", NormUnit::kChars).utf8_fallback);
}

TEST(UnitLength, CjkCharsAreAThirdOfBytes) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    std::string line;
    const int n = static_cast<int>(rng() % 40);
    for (int k = 0; k < n; ++k) {
      const std::uint32_t cp = 0x4e00 + static_cast<std::uint32_t>(rng() % 0x5000);
      line += static_cast<char>(0xe0 | (cp >> 12));
      line += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
      line += static_cast<char>(0x80 | (cp & 0x3f));
    }
    const auto chars = unit_length(line, NormUnit::kChars);
    ASSERT_FALSE(chars.utf8_fallback);
    ASSERT_EQ(chars.value, oracle::utf8_lead_bytes(line));
    ASSERT_EQ(chars.value * 3, line.size());
  }
}

class CorpusFiles : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = test::fresh_dir("corpus"); }
  fs::path dir_;
};

TEST_F(CorpusFiles, LoadsLabeledRecords) {
  test::write_file(dir_ / "aa.jsonl", "{\"text\":\"ab ab\",\"lang\":\"aa\"}\n{\"text\":\"ab ab\",\"lang\":\"aa\"}\n");
  test::write_file(dir_ / "m.json", R"({"languages":[{"lang":"aa","path":"aa.jsonl"}]})");
  const LabeledCorpus c = load_labeled_corpus(dir_ / "m.json");
  const LanguageShard& s = c.shard(LanguageId("aa"));
  EXPECT_EQ(s.words.counts, (std::map<Bytes, std::uint64_t>{{"ab", 2}, {" ab", 2}}));
  EXPECT_EQ(s.totals[NormUnit::kWords], 4u);
  EXPECT_EQ(s.totals[NormUnit::kBytes], 10u);
  EXPECT_EQ(s.records, 2u);

  const LabeledCorpus limited = load_labeled_corpus(dir_ / "m.json", 1);
  EXPECT_EQ(limited.shard(LanguageId("aa")).words.counts, (std::map<Bytes, std::uint64_t>{{"ab", 1}, {" ab", 1}}));
  EXPECT_EQ(limited.shard(LanguageId("aa")).totals[NormUnit::kBytes], 5u);
}

TEST_F(CorpusFiles, SingleRecordExample) {
  test::write_file(dir_ / "aa.jsonl", "{\"text\":\"ab ab\",\"lang\":\"aa\"}\n");
  test::write_file(dir_ / "m.json", R"({"languages":[{"lang":"aa","path":"aa.jsonl"}]})");
  const LanguageShard& s = load_labeled_corpus(dir_ / "m.json").shard(LanguageId("aa"));
  EXPECT_EQ(s.totals[NormUnit::kWords], 2u);
  EXPECT_EQ(s.totals[NormUnit::kBytes], 5u);
}

TEST_F(CorpusFiles, RecordOrderDoesNotMatter) {
  std::vector<std::string> recs{"x yy z", "yy yy", "z x", "q", ""};
  auto write = [&](const std::vector<std::string>& order) {
    std::string body;
    for (const auto& r : order) body += "{\"text\":\"" + r + "\",\"lang\":\"aa\"}\n";
    test::write_file(dir_ / "aa.jsonl", body);
    test::write_file(dir_ / "m.json", R"({"languages":[{"lang":"aa","path":"aa.jsonl"}]})");
    return load_labeled_corpus(dir_ / "m.json").shard(LanguageId("aa"));
  };
  const LanguageShard a = write(recs);
  std::reverse(recs.begin(), recs.end());
  const LanguageShard b = write(recs);
  EXPECT_EQ(a.words, b.words);
  EXPECT_EQ(a.totals, b.totals);
}

TEST_F(CorpusFiles, Errors) {
  test::write_file(dir_ / "aa.jsonl", "{\"text\":\"ab\",\"lang\":\"aa\"}\nnot json\n");
  test::write_file(dir_ / "bb.jsonl", "");
  test::write_file(dir_ / "m.json", R"({"languages":[{"lang":"aa","path":"aa.jsonl"}]})");
  EXPECT_THAT_THROWS(load_labeled_corpus(dir_ / "m.json"), DataError, "aa.jsonl:2");

  test::write_file(dir_ / "aa.jsonl", "{\"text\":\"ab\",\"lang\":\"zz\"}\n");
  EXPECT_THAT_THROWS(load_labeled_corpus(dir_ / "m.json"), DataError, "unknown language 'zz'");

  test::write_file(dir_ / "aa.jsonl", "{\"text\":\"ab\",\"lang\":\"aa\"}\n");
  test::write_file(dir_ / "m.json",
                   R"({"languages":[{"lang":"aa","path":"aa.jsonl"},{"lang":"bb","path":"bb.jsonl"}]})");
  EXPECT_THAT_THROWS(load_labeled_corpus(dir_ / "m.json"), DataError, "empty language partition");

  test::write_file(dir_ / "m.json", R"({"languages":[{"lang":"aa","path":"missing.jsonl"}]})");
  EXPECT_THAT_THROWS(load_labeled_corpus(dir_ / "m.json"), DataError, "cannot open");
}

TEST_F(CorpusFiles, ParallelDev) {
  fs::create_directories(dir_ / "dev");
  test::write_file(dir_ / "dev/aa.txt", "one\ntwo\nthree\n");
  test::write_file(dir_ / "dev/bb.txt", "uno\ndos\ntres");
  const ParallelDevCorpus dev = load_parallel_dev(dir_ / "dev", {LanguageId("aa"), LanguageId("bb")});
  EXPECT_EQ(dev.num_lines(), 3u);
  EXPECT_EQ(dev.lines_for(LanguageId("bb"))[2], "tres");
  EXPECT_EQ(discover_dev_languages(dir_ / "dev"), (std::vector<LanguageId>{LanguageId("aa"), LanguageId("bb")}));

  test::write_file(dir_ / "dev/bb.txt", "uno\ndos\ntres\ncuatro\n");
  EXPECT_THAT_THROWS(load_parallel_dev(dir_ / "dev", {LanguageId("aa"), LanguageId("bb")}), DataError,
                     "aa=3 bb=4");
  EXPECT_THAT_THROWS(load_parallel_dev(dir_ / "dev", {LanguageId("cc")}), DataError, "missing dev file");
  test::write_file(dir_ / "dev/bb.txt", "uno\n \ntres\n");
  EXPECT_THAT_THROWS(load_parallel_dev(dir_ / "dev", {LanguageId("aa"), LanguageId("bb")}), DataError, "blank");
}

TEST_F(CorpusFiles, DevLineCountMatchesIndependentCount) {
  const SyntheticSpec spec = default_synthetic_spec({0.5, 0.3, 0.2}, 50'000, 37);
  const SyntheticFiles files = generate_synthetic(spec, 3, dir_);
  const auto langs = discover_dev_languages(files.dev_dir);
  const ParallelDevCorpus dev = load_parallel_dev(files.dev_dir, langs);
  for (const auto& l : langs) {
    const std::string raw = test::read_file(files.dev_dir / (l.code() + ".txt"));
    EXPECT_EQ(static_cast<std::size_t>(std::count(raw.begin(), raw.end(), '\n')), dev.num_lines());
  }
  EXPECT_EQ(dev.num_lines(), 37u);
}

TEST_F(CorpusFiles, SyntheticTotalsMatchProportions) {
  const SyntheticSpec spec = default_synthetic_spec({0.80, 0.15, 0.05}, 400'000, 100);
  const SyntheticFiles files = generate_synthetic(spec, 42, dir_);
  const LabeledCorpus corpus = load_labeled_corpus(files.manifest);
  for (const auto& l : spec.languages) {
    const LanguageId id(l.lang);
    // Recount raw text bytes straight from the emitted JSONL.
    std::uint64_t recount = 0;
    std::istringstream in(test::read_file(dir_ / "train" / (l.lang + ".jsonl")));
    for (std::string line; std::getline(in, line);) {
      recount += nlohmann::json::parse(line)["text"].get<std::string>().size();
    }
    EXPECT_EQ(recount, files.train_bytes.at(id));
    EXPECT_EQ(recount, corpus.shard(id).totals[NormUnit::kBytes]);
    const double target = l.proportion * static_cast<double>(spec.train_bytes);
    EXPECT_NEAR(static_cast<double>(recount), target, 0.02 * target) << l.lang;
  }
  const ParallelDevCorpus dev = load_parallel_dev(files.dev_dir, corpus.languages());
  EXPECT_EQ(dev.num_lines(), 100u);
}

TEST_F(CorpusFiles, SyntheticIsDeterministic) {
  const SyntheticSpec spec = default_synthetic_spec({0.6, 0.4}, 30'000, 20);
  generate_synthetic(spec, 9, dir_ / "a");
  generate_synthetic(spec, 9, dir_ / "b");
  generate_synthetic(spec, 10, dir_ / "c");
  for (const char* rel : {"manifest.json", "train/lat.jsonl", "train/cyr.jsonl", "dev/lat.txt", "dev/cyr.txt"}) {
    EXPECT_EQ(test::read_file(dir_ / "a" / rel), test::read_file(dir_ / "b" / rel)) << rel;
  }
  EXPECT_NE(test::read_file(dir_ / "a/dev/lat.txt"), test::read_file(dir_ / "c/dev/lat.txt"));
}

TEST(Synthetic, DevLinesAreContentAligned) {
  const SyntheticCorpus c = render_synthetic(default_synthetic_spec({0.5, 0.3, 0.2}, 20'000, 50), 1);
  for (std::size_t j = 0; j < 50; ++j) {
    const auto words = unit_length(c.dev[0][j], NormUnit::kWords).value;
    for (std::size_t i = 1; i < c.languages.size(); ++i) {
      EXPECT_EQ(unit_length(c.dev[i][j], NormUnit::kWords).value, words);
    }
  }
}

TEST(Synthetic, MonolingualAndValidation) {
  const SyntheticSpec mono = default_synthetic_spec({1.0}, 10'000, 5);
  const LabeledCorpus c = to_labeled_corpus(render_synthetic(mono, 1));
  EXPECT_EQ(c.languages().size(), 1u);
  EXPECT_FALSE(c.empty());

  SyntheticSpec bad = default_synthetic_spec({0.5, 0.5});
  bad.languages[1].alphabet += "a";
  EXPECT_THAT_THROWS(bad.validate(), UsageError, "overlap");
  bad = default_synthetic_spec({0.5, 0.5});
  bad.languages[0].proportion = 0.6;
  EXPECT_THAT_THROWS(bad.validate(), UsageError, "sum");

  const SyntheticSpec parsed = parse_synthetic_spec(R"({
    "dev_lines": 3, "train_bytes": 1000, "concepts": 50,
    "languages": [{"lang": "x", "alphabet": "abc", "proportion": 0.5},
                  {"lang": "y", "alphabet": "def", "proportion": 0.5}]})");
  EXPECT_EQ(parsed.languages.size(), 2u);
  EXPECT_EQ(parsed.dev_lines, 3u);
}

}  // namespace
}  // namespace pbpe
