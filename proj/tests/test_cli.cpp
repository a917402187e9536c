#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pbpe/cli.hpp"
#include "pbpe/metrics.hpp"
#include "pbpe/parity.hpp"
#include "test_util.hpp"

namespace pbpe {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out;
  std::ostringstream err;
  CliResult r;
  r.code = run_cli(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// One small synthetic corpus shared by every test in this file.
const fs::path& corpus_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("pbpe-cli-" + std::to_string(::getpid())) / "corpus";
    fs::remove_all(d);
    const CliResult r = run({"synth", "--out", d.string(), "--seed", "3", "--train-bytes", "60000", "--dev-lines", "30"});
    EXPECT_EQ(r.code, 0) << r.err;
    return d;
  }();
  return dir;
}

std::string manifest() { return (corpus_dir() / "manifest.json").string(); }
std::string dev_dir() { return (corpus_dir() / "dev").string(); }

fs::path write_example_model(const fs::path& dir) {
  const fs::path p = dir / "example.txt";
  test::write_file(p, "parity-bpe v1\nmerges:\nb\ta\nba\tb\n");
  return p;
}

TEST(Synth, DeterministicPerSeed) {
  const auto dir = test::fresh_dir("cli");
  for (const char* name : {"a", "b"}) {
    ASSERT_EQ(run({"synth", "--out", (dir / name).string(), "--seed", "11", "--train-bytes", "5000"}).code, 0);
  }
  ASSERT_EQ(run({"synth", "--out", (dir / "c").string(), "--seed", "12", "--train-bytes", "5000"}).code, 0);
  for (const char* f : {"train/lat.jsonl", "dev/cyr.txt", "manifest.json", "synth.json"}) {
    EXPECT_EQ(test::read_file(dir / "a" / f), test::read_file(dir / "b" / f)) << f;
  }
  EXPECT_NE(test::read_file(dir / "a" / "dev/lat.txt"), test::read_file(dir / "c" / "dev/lat.txt"));
  const auto info = ojson::parse(test::read_file(dir / "a" / "synth.json"));
  EXPECT_EQ(info.at("provenance").at("config").at("seed"), 11);
}

TEST(Synth, BadSpecIsAUsageError) {
  const auto dir = test::fresh_dir("cli");
  test::write_file(dir / "spec.json",
                   R"({"languages":[{"lang":"aa","alphabet":"ab","proportion":0.5},)"
                   R"({"lang":"bb","alphabet":"bc","proportion":0.5}]})");
  const CliResult r = run({"synth", "--spec", (dir / "spec.json").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, kExitUsage) << r.err;
}

TEST(Train, ClassicalMatchesLibrary) {
  const auto dir = test::fresh_dir("cli");
  const std::string model = (dir / "m.txt").string();
  const CliResult r = run({"train", "--classical", "--merges", "120", "--corpus", manifest(), "--out", model});
  ASSERT_EQ(r.code, 0) << r.err;
  const TokenizerModel expected = train_classical(load_labeled_corpus(manifest()), 120).model;
  EXPECT_EQ(load_model(model).merge_pairs(), expected.merge_pairs());
  EXPECT_TRUE(fs::exists(model + ".log.jsonl"));
  const auto summary = ojson::parse(test::read_file(model + ".summary.json"));
  EXPECT_EQ(summary.at("merges_learned"), 120);
  EXPECT_EQ(summary.at("final_cr").at("source"), "training");
  EXPECT_EQ(summary.at("provenance").at("outputs").at(model), sha256_hex(test::read_file(model)));
  EXPECT_EQ(summary.at("provenance").at("inputs").at(manifest()), sha256_hex(test::read_file(manifest())));
}

TEST(Train, ParityDefaultsAreWindowAndHybrid) {
  const auto dir = test::fresh_dir("cli");
  const std::string model = (dir / "p.txt").string();
  const CliResult r = run({"train", "--parity", "--merges", "120", "--corpus", manifest(), "--dev", dev_dir(), "--out", model});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto config = ojson::parse(test::read_file(model + ".summary.json")).at("provenance").at("config");
  EXPECT_EQ(config.at("window"), 100);
  EXPECT_EQ(config.at("alpha"), "2");
  EXPECT_EQ(config.at("hybrid_merges"), 60);
  EXPECT_EQ(config.at("unit"), "lines");

  const auto corpus = load_labeled_corpus(manifest());
  const auto dev = load_parallel_dev(dev_dir(), discover_dev_languages(dev_dir()));
  const TrainResult expected = train_parity(corpus, dev, ParityConfig::window_hybrid_defaults(120));
  EXPECT_EQ(load_model(model).merge_pairs(), expected.model.merge_pairs());
  EXPECT_EQ(test::read_file(model + ".log.jsonl"), train_log_to_jsonl(expected.log));
}

TEST(Train, HybridPrefixEqualsClassicalRun) {
  const auto dir = test::fresh_dir("cli");
  const std::string c = (dir / "c.txt").string();
  const std::string h = (dir / "h.txt").string();
  ASSERT_EQ(run({"train", "--classical", "--merges", "50", "--corpus", manifest(), "--out", c}).code, 0);
  ASSERT_EQ(run({"train", "--parity", "--merges", "100", "--hybrid-split", "0.5", "--corpus", manifest(), "--dev",
                 dev_dir(), "--out", h})
                .code,
            0);
  EXPECT_EQ(load_model(h).prefix(50).merge_pairs(), load_model(c).merge_pairs());
}

TEST(Train, NoDevAndBaseParity) {
  const auto dir = test::fresh_dir("cli");
  const std::string nd = (dir / "nd.txt").string();
  CliResult r = run({"train", "--no-dev", "--merges", "40", "--corpus", manifest(), "--out", nd});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(ojson::parse(test::read_file(nd + ".summary.json")).at("final_cr").at("unit"), "bytes");

  const std::string base = (dir / "base.txt").string();
  r = run({"train", "--merges", "40", "--window", "0", "--hybrid-merges", "0", "--unit", "words", "--corpus", manifest(),
           "--dev", dev_dir(), "--out", base});
  ASSERT_EQ(r.code, 0) << r.err;
  ParityConfig pc;
  pc.total_merges = 40;
  pc.unit = NormUnit::kWords;
  const auto dev = load_parallel_dev(dev_dir(), discover_dev_languages(dev_dir()));
  EXPECT_EQ(load_model(base).merge_pairs(), train_parity(load_labeled_corpus(manifest()), dev, pc).model.merge_pairs());
}

TEST(Train, ConfigFileFillsUnsetFlags) {
  const auto dir = test::fresh_dir("cli");
  test::write_file(dir / "run.json", ojson{{"classical", true},
                                           {"merges", 30},
                                           {"corpus", manifest()},
                                           {"out", "from_config.txt"}}
                                         .dump());
  CliResult r = run({"train", "--config", (dir / "run.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_model(dir / "from_config.txt").num_merges(), 30u);

  // Command-line flags win over the file.
  r = run({"train", "--config", (dir / "run.json").string(), "--merges", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_model(dir / "from_config.txt").num_merges(), 10u);

  test::write_file(dir / "bad.json", R"({"merges": 5, "colour": "red"})");
  r = run({"train", "--config", (dir / "bad.json").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST(Train, ErrorsMapToExitCodes) {
  const auto dir = test::fresh_dir("cli");
  const std::string out = (dir / "m.txt").string();
  EXPECT_EQ(run({"train", "--merges", "5", "--corpus", manifest(), "--out", out}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--classical", "--parity", "--merges", "5", "--corpus", manifest(), "--out", out}).code,
            kExitUsage);
  EXPECT_EQ(run({"train", "--merges", "5", "--alpha", "two", "--corpus", manifest(), "--dev", dev_dir(), "--out", out})
                .code,
            kExitUsage);
  EXPECT_EQ(run({"train", "--merges", "5", "--hybrid-merges", "6", "--corpus", manifest(), "--dev", dev_dir(), "--out",
                 out})
                .code,
            kExitUsage);
  EXPECT_EQ(run({"train", "--no-dev", "--unit", "lines", "--merges", "5", "--corpus", manifest(), "--out", out}).code,
            kExitUsage);
  EXPECT_EQ(run({"train", "--classical", "--merges", "5", "--corpus", (dir / "missing.json").string(), "--out", out})
                .code,
            kExitData);
  EXPECT_EQ(run({"train", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(run({}).code, kExitUsage);
  const CliResult help = run({"--help"});
  EXPECT_EQ(help.code, kExitOk);
  EXPECT_NE(help.out.find("train"), std::string::npos);
}

TEST(Encode, ExampleModel) {
  const auto dir = test::fresh_dir("cli");
  const std::string model = write_example_model(dir).string();
  CliResult r = run({"encode", "--model", model}, "babab\n");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "ba bab\n");
  r = run({"encode", "--model", model, "--ids"}, "babab\nab");
  EXPECT_EQ(r.out, "256 257\n97 98");
  EXPECT_EQ(run({"decode", "--model", model}, "ba bab\n").out, "babab\n");
  EXPECT_EQ(run({"decode", "--model", model, "--ids"}, "256 257\n").out, "babab\n");
}

TEST(Encode, EmptyInput) {
  const auto dir = test::fresh_dir("cli");
  const std::string model = write_example_model(dir).string();
  const CliResult r = run({"encode", "--model", model}, "");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(run({"decode", "--model", model}, "").out, "");
  EXPECT_EQ(run({"encode", "--model", model}, "\n\n").out, "\n\n");
}

TEST(Encode, PipeRoundTripsOnFuzz) {
  const auto dir = test::fresh_dir("cli");
  const std::string model = (dir / "m.txt").string();
  ASSERT_EQ(run({"train", "--classical", "--merges", "150", "--corpus", manifest(), "--out", model}).code, 0);
  std::mt19937_64 rng(5);
  std::string text;
  for (int i = 0; i < 300; ++i) {
    std::string line = oracle::random_bytes(rng, 80);
    std::replace(line.begin(), line.end(), '\n', 'x');
    text += line + "\n";
  }
  text += test::read_file(fs::path(dev_dir()) / "cyr.txt");
  for (bool ids : {false, true}) {
    std::vector<std::string> enc{"encode", "--model", model};
    std::vector<std::string> dec{"decode", "--model", model};
    if (ids) {
      enc.push_back("--ids");
      dec.push_back("--ids");
    }
    const CliResult e = run(enc, text);
    ASSERT_EQ(e.code, 0) << e.err;
    const CliResult d = run(dec, e.out);
    ASSERT_EQ(d.code, 0) << d.err;
    EXPECT_EQ(d.out, text);
  }
  // Reading from a file gives the same output as stdin.
  test::write_file(dir / "in.txt", text);
  EXPECT_EQ(run({"encode", "--model", model, (dir / "in.txt").string()}).out, run({"encode", "--model", model}, text).out);
}

TEST(Decode, UnknownTokensAreDataErrors) {
  const auto dir = test::fresh_dir("cli");
  const std::string model = write_example_model(dir).string();
  CliResult r = run({"decode", "--model", model, "--ids"}, "97\n999\n");
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("999"), std::string::npos) << r.err;
  EXPECT_EQ(run({"decode", "--model", model}, "bab zz\n").code, kExitData);
  EXPECT_EQ(run({"decode", "--model", (dir / "none.txt").string()}, "").code, kExitData);
}

TEST(Eval, IdentityModelAndLibraryParity) {
  const auto dir = test::fresh_dir("cli");
  test::write_file(dir / "identity.txt", "parity-bpe v1\nmerges:\n");
  const std::string report_path = (dir / "r.json").string();
  const CliResult r = run({"eval", "--model", (dir / "identity.txt").string(), "--dev", dev_dir(), "--out", report_path,
                     "--csv", (dir / "r.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = ojson::parse(test::read_file(report_path));
  EXPECT_EQ(j.at("global").at("compression_rate").at("bytes").at("ratio_of_sums"), 1.0);
  EXPECT_EQ(j.at("global").at("compression_rate").at("bytes").at("mean_of_ratios"), 1.0);

  MetricReport lib = full_report(TokenizerModel(), load_parallel_dev(dev_dir(), discover_dev_languages(dev_dir())));
  MetricReport cli = report_from_json(j);
  EXPECT_FALSE(cli.provenance.at("inputs").empty());
  cli.provenance = lib.provenance = ojson::object();
  EXPECT_EQ(cli, lib);
  const std::string csv = test::read_file(dir / "r.csv");
  EXPECT_EQ(csv.rfind("scope,metric,value\nglobal,gini,", 0), 0u);
}

TEST(Eval, TwoModelsDifferOnlyInModelInputs) {
  const auto dir = test::fresh_dir("cli");
  test::write_file(dir / "a.txt", "parity-bpe v1\nmerges:\n");
  write_example_model(dir);
  const auto a = ojson::parse(run({"eval", "--model", (dir / "a.txt").string(), "--dev", dev_dir()}).out);
  const auto b = ojson::parse(run({"eval", "--model", (dir / "example.txt").string(), "--dev", dev_dir()}).out);
  auto ia = a.at("provenance").at("inputs");
  auto ib = b.at("provenance").at("inputs");
  ia.erase((dir / "a.txt").string());
  ib.erase((dir / "example.txt").string());
  EXPECT_EQ(ia, ib);
  EXPECT_EQ(a.at("provenance").at("languages"), b.at("provenance").at("languages"));
}

TEST(Eval, GoldDirectory) {
  const auto dir = test::fresh_dir("cli");
  write_example_model(dir);
  fs::create_directories(dir / "gold");
  test::write_file(dir / "gold" / "lat.tsv", "babab\tba|bab\n");
  const CliResult r =
      run({"eval", "--model", (dir / "example.txt").string(), "--dev", dev_dir(), "--gold", (dir / "gold").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = ojson::parse(r.out);
  EXPECT_EQ(j.at("per_language").at("lat").at("morph_boundary_f1"), 1.0);

  test::write_file(dir / "gold" / "xx.tsv", "ab\ta|b\n");
  EXPECT_EQ(
      run({"eval", "--model", (dir / "example.txt").string(), "--dev", dev_dir(), "--gold", (dir / "gold").string()})
          .code,
      kExitData);
}

TEST(Eval, MisalignedDevIsADataError) {
  const auto dir = test::fresh_dir("cli");
  write_example_model(dir);
  fs::create_directories(dir / "dev");
  test::write_file(dir / "dev" / "aa.txt", "one\ntwo\n");
  test::write_file(dir / "dev" / "bb.txt", "one\n");
  const CliResult r = run({"eval", "--model", (dir / "example.txt").string(), "--dev", (dir / "dev").string()});
  EXPECT_EQ(r.code, kExitData);
}

std::vector<std::string> header_of(const std::string& table) {
  std::istringstream ss(table.substr(0, table.find('\n')));
  std::vector<std::string> cols;
  for (std::string c; ss >> c;) cols.push_back(c);
  return cols;
}

double row_value(const std::string& csv, const std::string& metric, std::size_t column) {
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(metric + ",", 0) != 0) continue;
    std::istringstream cells(line);
    std::string cell;
    for (std::size_t i = 0; i <= column; ++i) std::getline(cells, cell, ',');
    return std::stod(cell);
  }
  ADD_FAILURE() << "no row " << metric;
  return 0.0;
}

TEST(Compare, ParityHasLowerGini) {
  const auto dir = test::fresh_dir("cli");
  const std::string c = (dir / "classical.txt").string();
  const std::string p = (dir / "parity.txt").string();
  ASSERT_EQ(run({"train", "--classical", "--merges", "150", "--corpus", manifest(), "--out", c}).code, 0);
  ASSERT_EQ(run({"train", "--merges", "150", "--window", "0", "--hybrid-split", "0", "--corpus", manifest(), "--dev",
                 dev_dir(), "--out", p})
                .code,
            0);
  const std::string csv_path = (dir / "cmp.csv").string();
  const CliResult r = run({"compare", p, c, "--dev", dev_dir(), "--csv", csv_path});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(header_of(r.out), (std::vector<std::string>{"metric", "classical.txt", "parity.txt"}));
  EXPECT_TRUE(r.err.empty()) << r.err;
  const std::string csv = test::read_file(csv_path);
  EXPECT_LT(row_value(csv, "gini", 2), row_value(csv, "gini", 1));
  EXPECT_NE(csv.find("cr_spread,"), std::string::npos);
}

TEST(Compare, SameModelTwiceAndOrderingAndWarnings) {
  const auto dir = test::fresh_dir("cli");
  write_example_model(dir);
  fs::create_directories(dir / "x");
  test::write_file(dir / "x" / "b.txt", "parity-bpe v1\nmerges:\nb\ta\nba\tb\n");
  test::write_file(dir / "a.txt", "parity-bpe v1\nmerges:\n");
  const std::string csv_path = (dir / "cmp.csv").string();
  CliResult r = run({"compare", (dir / "example.txt").string(), (dir / "x" / "b.txt").string(), "--dev", dev_dir(), "--csv",
               csv_path});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(test::read_file(csv_path));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "metric,b.txt,example.txt");
  while (std::getline(in, line)) {
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    EXPECT_EQ(line.substr(first + 1, second - first - 1), line.substr(second + 1)) << line;
  }

  r = run({"compare", (dir / "x" / "b.txt").string(), (dir / "example.txt").string(), (dir / "a.txt").string(), "--dev",
           dev_dir()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(header_of(r.out), (std::vector<std::string>{"metric", "a.txt", "b.txt", "example.txt"}));
  EXPECT_NE(r.err.find("warning: vocabulary sizes differ"), std::string::npos);

  EXPECT_EQ(run({"compare", (dir / "a.txt").string(), "--dev", dev_dir()}).code, kExitUsage);
}

}  // namespace
}  // namespace pbpe
