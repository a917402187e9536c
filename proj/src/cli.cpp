#include "pbpe/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pbpe/corpus.hpp"
#include "pbpe/error.hpp"
#include "pbpe/metrics.hpp"
#include "pbpe/parity.hpp"
#include "pbpe/tokenizer.hpp"
#include "pbpe/trainer.hpp"

namespace pbpe {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("error while writing " + path.string());
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

ojson provenance(std::string_view command, const ojson& config, const ojson& inputs) {
  ojson p;
  p["tool"] = "pbpe";
  p["command"] = command;
  p["config"] = config;
  p["config_sha256"] = sha256_hex(config.dump());
  p["inputs"] = inputs;
  return p;
}

ojson manifest_digests(const fs::path& manifest) {
  const std::string text = read_text(manifest);
  ojson out;
  out[manifest.string()] = sha256_hex(text);
  const auto j = ojson::parse(text, nullptr, false);
  if (j.is_object() && j.contains("languages") && j["languages"].is_array()) {
    for (const auto& entry : j["languages"]) {
      if (!entry.contains("path") || !entry["path"].is_string()) continue;
      const fs::path p = manifest.parent_path() / entry["path"].get<std::string>();
      out[p.string()] = sha256_hex(read_text(p));
    }
  }
  return out;
}

void add_dev_digests(ojson& inputs, const fs::path& dir, const std::vector<LanguageId>& langs) {
  for (const auto& l : langs) {
    const fs::path p = dir / (l.code() + ".txt");
    inputs[p.string()] = sha256_hex(read_text(p));
  }
}

ParallelDevCorpus load_dev_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dev directory not found: " + dir.string());
  const auto langs = discover_dev_languages(dir);
  if (langs.empty()) throw DataError("no <lang>.txt files in " + dir.string());
  return load_parallel_dev(dir, langs);
}

// Splits on '\n'. Records whether the text ended with a newline so that
// line-oriented commands can reproduce it.
std::vector<std::string_view> split_lines(std::string_view text, bool& trailing_newline) {
  std::vector<std::string_view> lines;
  trailing_newline = !text.empty() && text.back() == '\n';
  if (trailing_newline) text.remove_suffix(1);
  if (text.empty() && !trailing_newline) return lines;
  std::size_t start = 0;
  while (true) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string read_input(const std::string& path, std::istream& in) {
  if (!path.empty() && path != "-") return read_text(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::pair<std::string, double>> flatten(const MetricValues& v) {
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& [unit, est] : v.compression_rate) {
    rows.emplace_back("compression_rate." + unit + ".mean_of_ratios", est.mean_of_ratios);
    rows.emplace_back("compression_rate." + unit + ".ratio_of_sums", est.ratio_of_sums);
  }
  rows.emplace_back("fertility", v.fertility);
  rows.emplace_back("vocab_utilization", v.vocab_utilization);
  rows.emplace_back("type_token_ratio", v.type_token_ratio);
  rows.emplace_back("avg_token_rank", v.avg_token_rank);
  for (const auto& [label, h] : v.renyi_entropy) rows.emplace_back("renyi_entropy." + label, h);
  rows.emplace_back("tokens", static_cast<double>(v.tokens));
  rows.emplace_back("lines", static_cast<double>(v.lines));
  rows.emplace_back("tokens_per_line", v.tokens_per_line);
  if (v.morph_boundary) {
    rows.emplace_back("morph_boundary_p", v.morph_boundary->precision);
    rows.emplace_back("morph_boundary_r", v.morph_boundary->recall);
    rows.emplace_back("morph_boundary_f1", v.morph_boundary->f1);
  }
  return rows;
}

std::string report_csv(const MetricReport& r) {
  std::ostringstream out;
  out << "scope,metric,value\n";
  out << "global,gini," << format_number(r.gini) << "\n";
  out << "global,cr_spread," << format_number(r.cr_spread) << "\n";
  for (const auto& [k, v] : flatten(r.global)) out << "global," << k << "," << format_number(v) << "\n";
  for (const auto& [lang, values] : r.per_language) {
    for (const auto& [k, v] : flatten(values)) out << lang << "," << k << "," << format_number(v) << "\n";
  }
  return out.str();
}

ojson cr_table_json(const CRTable& t) {
  ojson out = ojson::object();
  for (std::size_t i = 0; i < t.languages.size(); ++i) {
    out[t.languages[i].code()] = {{"units", t.unit_totals[i]}, {"tokens", t.token_totals[i]}, {"cr", t.cr(i)}};
  }
  return out;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  bool classical = false;
  bool parity = false;
  bool no_dev = false;
  std::size_t merges = 0;
  std::string corpus;
  std::string dev;
  std::size_t window = 100;
  std::string alpha = "2";
  double hybrid_split = 0.5;
  std::size_t hybrid_merges = 0;
  std::string unit;
  std::uint64_t limit_per_language = 0;
  std::string out;
  std::string log;
  std::string summary;
  std::string config;
};

// Fills options that were not given on the command line from a JSON object
// whose keys are long flag names. Relative paths resolve against the config
// file's directory.
void apply_config(CLI::App& sub, TrainOptions& o) {
  if (o.config.empty()) return;
  const fs::path path(o.config);
  const auto j = ojson::parse(read_text(path), nullptr, false);
  if (!j.is_object()) throw UsageError("config " + path.string() + " is not a JSON object");
  const fs::path base = path.parent_path();
  auto resolve = [&](const ojson& v) {
    const fs::path p(v.get<std::string>());
    return (p.is_absolute() ? p : base / p).string();
  };
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = nullptr;
    try {
      opt = sub.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw UsageError("unknown key '" + key + "' in " + path.string());
    }
    if (key == "config") throw UsageError("config files cannot nest");
    if (opt->count() > 0) continue;
    try {
      if (key == "classical") o.classical = value.get<bool>();
      else if (key == "parity") o.parity = value.get<bool>();
      else if (key == "no-dev") o.no_dev = value.get<bool>();
      else if (key == "merges") o.merges = value.get<std::size_t>();
      else if (key == "corpus") o.corpus = resolve(value);
      else if (key == "dev") o.dev = resolve(value);
      else if (key == "window") o.window = value.get<std::size_t>();
      else if (key == "alpha") o.alpha = value.is_string() ? value.get<std::string>() : value.dump();
      else if (key == "hybrid-split") o.hybrid_split = value.get<double>();
      else if (key == "hybrid-merges") o.hybrid_merges = value.get<std::size_t>();
      else if (key == "unit") o.unit = value.get<std::string>();
      else if (key == "limit-per-language") o.limit_per_language = value.get<std::uint64_t>();
      else if (key == "out") o.out = resolve(value);
      else if (key == "log") o.log = resolve(value);
      else if (key == "summary") o.summary = resolve(value);
      else throw UsageError("unsupported key '" + key + "' in " + path.string());
    } catch (const nlohmann::json::exception&) {
      throw UsageError("bad value for '" + key + "' in " + path.string());
    }
    // Mark as given so the mode checks below see it.
    opt->add_result(value.is_string() ? value.get<std::string>() : value.dump());
  }
}

void cmd_train(CLI::App& sub, TrainOptions& o, std::ostream& out) {
  apply_config(sub, o);
  if (o.merges == 0 && sub.get_option("--merges")->count() == 0) throw UsageError("--merges is required");
  if (o.corpus.empty()) throw UsageError("--corpus is required");
  if (o.out.empty()) throw UsageError("--out is required");
  if (o.classical && (o.parity || o.no_dev)) throw UsageError("--classical cannot be combined with --parity or --no-dev");
  const bool classical = o.classical;
  const bool hybrid_merges_given = sub.get_option("--hybrid-merges")->count() > 0;
  const bool hybrid_split_given = sub.get_option("--hybrid-split")->count() > 0;
  if (hybrid_merges_given && hybrid_split_given) throw UsageError("give --hybrid-split or --hybrid-merges, not both");
  if (!classical && !o.no_dev && o.dev.empty()) throw UsageError("parity training needs --dev (or --no-dev)");
  if (o.no_dev && !o.dev.empty()) throw UsageError("--no-dev cannot be combined with --dev");

  const NormUnit unit = o.unit.empty() ? (o.no_dev ? NormUnit::kBytes : NormUnit::kLines) : parse_norm_unit(o.unit);

  ParityConfig pc;
  pc.total_merges = o.merges;
  pc.window_size = o.window;
  pc.alpha = Rational::parse(o.alpha);
  pc.unit = unit;
  pc.dev_source = o.no_dev ? DevSource::kTrainingAsDev : DevSource::kParallelDev;
  if (hybrid_merges_given) {
    pc.hybrid_global_merges = o.hybrid_merges;
  } else {
    if (!(o.hybrid_split >= 0.0 && o.hybrid_split <= 1.0)) throw UsageError("--hybrid-split must be in [0, 1]");
    pc.hybrid_global_merges = static_cast<std::size_t>(std::floor(o.hybrid_split * static_cast<double>(o.merges)));
  }
  if (!classical) pc.validate();

  ojson config;
  config["mode"] = classical ? "classical" : (o.no_dev ? "parity-no-dev" : "parity");
  config["merges"] = o.merges;
  config["corpus"] = o.corpus;
  if (!o.dev.empty()) config["dev"] = o.dev;
  if (!classical) {
    config["window"] = pc.window_size;
    config["alpha"] = pc.alpha.to_string();
    config["hybrid_merges"] = pc.hybrid_global_merges;
  }
  config["unit"] = to_string(unit);
  if (o.limit_per_language > 0) config["limit_per_language"] = o.limit_per_language;

  const std::optional<std::uint64_t> limit =
      o.limit_per_language > 0 ? std::optional<std::uint64_t>(o.limit_per_language) : std::nullopt;
  const LabeledCorpus corpus = load_labeled_corpus(o.corpus, limit);
  ojson inputs = manifest_digests(o.corpus);

  std::optional<ParallelDevCorpus> dev;
  if (!o.dev.empty()) {
    dev = load_dev_dir(o.dev);
    add_dev_digests(inputs, o.dev, dev->languages);
  }

  TrainResult result;
  if (classical) {
    result = train_classical(corpus, o.merges);
  } else if (o.no_dev) {
    result = train_no_dev(corpus, pc);
  } else {
    result = train_parity(corpus, *dev, pc);
  }

  CRTable final_cr = dev ? compute_cr(*dev, result.model, unit) : compute_cr(corpus, result.model, NormUnit::kBytes);

  const std::string model_text = serialize_model(result.model);
  const fs::path model_path(o.out);
  const fs::path log_path = o.log.empty() ? fs::path(o.out + ".log.jsonl") : fs::path(o.log);
  const fs::path summary_path = o.summary.empty() ? fs::path(o.out + ".summary.json") : fs::path(o.summary);
  write_text(model_path, model_text);
  write_text(log_path, train_log_to_jsonl(result.log));

  ojson summary;
  summary["merges_requested"] = o.merges;
  summary["merges_learned"] = result.model.num_merges();
  summary["stop_reason"] = result.log.stop == StopReason::kBudgetReached ? "budget_reached" : "no_eligible_pair";
  summary["vocab_size"] = result.model.vocab_size();
  summary["final_cr"] = {{"unit", to_string(final_cr.unit)},
                         {"source", dev ? "dev" : "training"},
                         {"languages", cr_table_json(final_cr)}};
  ojson prov = provenance("train", config, inputs);
  prov["outputs"] = {{model_path.string(), sha256_hex(model_text)}};
  summary["provenance"] = prov;
  write_text(summary_path, summary.dump(2) + "\n");

  out << "learned " << result.model.num_merges() << " of " << o.merges << " merges ("
      << summary["stop_reason"].get<std::string>() << ")\n";
  out << "final compression (" << to_string(final_cr.unit) << " per token, " << (dev ? "dev" : "training") << "):\n";
  for (std::size_t i = 0; i < final_cr.languages.size(); ++i) {
    out << "  " << final_cr.languages[i].code() << "\t" << format_number(final_cr.cr(i)) << "\n";
  }
  out << "model: " << model_path.string() << "\nlog: " << log_path.string() << "\nsummary: " << summary_path.string()
      << "\n";
}

// ---------------------------------------------------------------------------
// encode / decode

struct CodecOptions {
  std::string model;
  std::string input;
  bool ids = false;
};

void cmd_encode(const CodecOptions& o, std::istream& in, std::ostream& out) {
  const TokenizerModel model = load_model(o.model);
  const std::string text = read_input(o.input, in);
  bool trailing = false;
  const auto lines = split_lines(text, trailing);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto ids = model.encode_ids(lines[i]);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (k > 0) out << ' ';
      if (o.ids) {
        out << ids[k];
      } else {
        out << escape_bytes(model.token_bytes(ids[k]));
      }
    }
    if (i + 1 < lines.size() || trailing) out << '\n';
  }
}

void cmd_decode(const CodecOptions& o, std::istream& in, std::ostream& out) {
  const TokenizerModel model = load_model(o.model);
  const std::string text = read_input(o.input, in);
  bool trailing = false;
  const auto lines = split_lines(text, trailing);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::vector<std::string_view> fields;
    for (std::size_t start = 0; start < lines[i].size();) {
      std::size_t sp = lines[i].find(' ', start);
      if (sp == std::string_view::npos) sp = lines[i].size();
      if (sp > start) fields.push_back(lines[i].substr(start, sp - start));
      start = sp + 1;
    }
    const std::string where = "input line " + std::to_string(i + 1) + ": ";
    if (o.ids) {
      std::vector<TokenId> ids;
      for (auto f : fields) {
        TokenId id = 0;
        const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), id);
        if (ec != std::errc() || ptr != f.data() + f.size()) {
          throw DataError(where + "not a token id: '" + std::string(f) + "'");
        }
        ids.push_back(id);
      }
      try {
        out << model.decode_ids(ids);
      } catch (const DataError& e) {
        throw DataError(where + e.what());
      }
    } else {
      std::vector<Bytes> tokens;
      for (auto f : fields) {
        auto t = unescape_bytes(f);
        if (!t) throw DataError(where + "malformed escaped token '" + std::string(f) + "'");
        tokens.push_back(std::move(*t));
      }
      try {
        out << model.decode(tokens);
      } catch (const DataError& e) {
        throw DataError(where + e.what());
      }
    }
    if (i + 1 < lines.size() || trailing) out << '\n';
  }
}

// ---------------------------------------------------------------------------
// eval / compare

std::map<LanguageId, std::vector<GoldSegmentation>> load_gold_dir(const fs::path& dir, ojson& inputs) {
  if (!fs::is_directory(dir)) throw DataError("gold directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tsv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::map<LanguageId, std::vector<GoldSegmentation>> gold;
  for (const auto& f : files) {
    gold[LanguageId(f.stem().string())] = load_gold_tsv(f);
    inputs[f.string()] = sha256_hex(read_text(f));
  }
  return gold;
}

struct EvalOptions {
  std::string model;
  std::string dev;
  std::string gold;
  std::string out;
  std::string csv;
};

void cmd_eval(const EvalOptions& o, std::ostream& out) {
  const TokenizerModel model = load_model(o.model);
  const ParallelDevCorpus dev = load_dev_dir(o.dev);
  ojson inputs;
  inputs[o.model] = sha256_hex(read_text(o.model));
  add_dev_digests(inputs, o.dev, dev.languages);
  ReportOptions options;
  if (!o.gold.empty()) options.gold = load_gold_dir(o.gold, inputs);
  ojson config = {{"model", o.model}, {"dev", o.dev}};
  if (!o.gold.empty()) config["gold"] = o.gold;
  options.provenance = provenance("eval", config, inputs);
  const MetricReport report = full_report(model, dev, options);
  const std::string json = report_to_json(report).dump(2) + "\n";
  if (o.out.empty() || o.out == "-") {
    out << json;
  } else {
    write_text(o.out, json);
  }
  if (!o.csv.empty()) write_text(o.csv, report_csv(report));
}

struct CompareOptions {
  std::vector<std::string> models;
  std::string dev;
  std::string csv;
};

void cmd_compare(CompareOptions o, std::ostream& out, std::ostream& err) {
  if (o.models.size() < 2) throw UsageError("compare needs at least two models");
  std::sort(o.models.begin(), o.models.end(), [](const std::string& a, const std::string& b) {
    const auto fa = fs::path(a).filename().string();
    const auto fb = fs::path(b).filename().string();
    return fa != fb ? fa < fb : a < b;
  });
  const ParallelDevCorpus dev = load_dev_dir(o.dev);

  std::vector<std::string> names;
  std::vector<std::size_t> vocab;
  std::vector<std::map<std::string, double>> columns;
  std::vector<std::string> row_order;
  auto add_row = [&](std::map<std::string, double>& col, const std::string& key, double v) {
    if (columns.empty()) row_order.push_back(key);
    col[key] = v;
  };
  for (const auto& path : o.models) {
    const TokenizerModel model = load_model(path);
    const MetricReport r = full_report(model, dev);
    std::map<std::string, double> col;
    add_row(col, "vocab_size", static_cast<double>(model.vocab_size()));
    add_row(col, "gini", r.gini);
    add_row(col, "cr_spread", r.cr_spread);
    for (const auto& [k, v] : flatten(r.global)) add_row(col, k, v);
    for (const auto& [lang, values] : r.per_language) {
      add_row(col, "compression_rate.lines.ratio_of_sums[" + lang + "]",
              values.compression_rate.at("lines").ratio_of_sums);
      add_row(col, "tokens_per_line[" + lang + "]", values.tokens_per_line);
    }
    names.push_back(fs::path(path).filename().string());
    vocab.push_back(model.vocab_size());
    columns.push_back(std::move(col));
  }
  if (std::adjacent_find(vocab.begin(), vocab.end(), std::not_equal_to<>()) != vocab.end()) {
    err << "warning: vocabulary sizes differ:";
    for (std::size_t i = 0; i < names.size(); ++i) err << " " << names[i] << "=" << vocab[i];
    err << "\n";
  }

  std::vector<std::size_t> width(names.size() + 1, std::string("metric").size());
  for (const auto& key : row_order) width[0] = std::max(width[0], key.size());
  for (std::size_t c = 0; c < names.size(); ++c) {
    width[c + 1] = names[c].size();
    for (const auto& key : row_order) width[c + 1] = std::max(width[c + 1], format_number(columns[c][key]).size());
  }
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w - s.size(), ' '); };
  out << pad("metric", width[0]);
  for (std::size_t c = 0; c < names.size(); ++c) out << "  " << pad(names[c], width[c + 1]);
  out << "\n";
  for (const auto& key : row_order) {
    out << pad(key, width[0]);
    for (std::size_t c = 0; c < names.size(); ++c) out << "  " << pad(format_number(columns[c][key]), width[c + 1]);
    out << "\n";
  }

  if (!o.csv.empty()) {
    std::ostringstream csv;
    csv << "metric";
    for (const auto& n : names) csv << "," << n;
    csv << "\n";
    for (const auto& key : row_order) {
      csv << key;
      for (auto& col : columns) csv << "," << format_number(col[key]);
      csv << "\n";
    }
    write_text(o.csv, csv.str());
  }
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  std::string spec;
  std::uint64_t seed = 0;
  std::string out;
  std::uint64_t train_bytes = 0;
  std::uint32_t dev_lines = 0;
};

void cmd_synth(const SynthOptions& o, std::ostream& out) {
  SyntheticSpec spec = o.spec.empty() ? default_synthetic_spec() : load_synthetic_spec(o.spec);
  if (o.train_bytes > 0) spec.train_bytes = o.train_bytes;
  if (o.dev_lines > 0) spec.dev_lines = o.dev_lines;
  spec.validate();
  const SyntheticFiles files = generate_synthetic(spec, o.seed, o.out);

  ojson config = {{"seed", o.seed}, {"train_bytes", spec.train_bytes}, {"dev_lines", spec.dev_lines}};
  ojson inputs = ojson::object();
  if (!o.spec.empty()) {
    config["spec"] = o.spec;
    inputs[o.spec] = sha256_hex(read_text(o.spec));
  }
  ojson info;
  info["train_bytes"] = ojson::object();
  for (const auto& [lang, n] : files.train_bytes) info["train_bytes"][lang.code()] = n;
  info["provenance"] = provenance("synth", config, inputs);
  write_text(fs::path(o.out) / "synth.json", info.dump(2) + "\n");

  out << "manifest: " << files.manifest.string() << "\ndev: " << files.dev_dir.string() << "\n";
  for (const auto& [lang, n] : files.train_bytes) out << "  " << lang.code() << "\t" << n << " bytes\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Byte-level BPE tokenizers with cross-language compression parity", "pbpe"};
  app.require_subcommand(1);

  TrainOptions train;
  CLI::App* t = app.add_subcommand("train", "Learn a merge list from a labeled corpus");
  t->add_flag("--classical", train.classical, "Global max-count merges");
  t->add_flag("--parity", train.parity, "Merges chosen for the worst-compressed language (default)");
  t->add_flag("--no-dev", train.no_dev, "Parity training with compression measured on the training corpus");
  t->add_option("--merges", train.merges, "Merge budget");
  t->add_option("--corpus", train.corpus, "Manifest of training shards");
  t->add_option("--dev", train.dev, "Directory of line-aligned <lang>.txt files");
  t->add_option("--window", train.window, "Moving-window length (0 disables)")->capture_default_str();
  t->add_option("--alpha", train.alpha, "Window quota factor")->capture_default_str();
  t->add_option("--hybrid-split", train.hybrid_split, "Fraction of the budget learned globally first")
      ->capture_default_str();
  t->add_option("--hybrid-merges", train.hybrid_merges, "Number of merges learned globally first");
  t->add_option("--unit", train.unit, "Compression unit: bytes, chars, words, lines");
  t->add_option("--limit-per-language", train.limit_per_language, "Keep at most this many records per language");
  t->add_option("--out", train.out, "Model file to write");
  t->add_option("--log", train.log, "Merge log (JSONL); default <out>.log.jsonl");
  t->add_option("--summary", train.summary, "Summary JSON; default <out>.summary.json");
  t->add_option("--config", train.config, "JSON file with defaults for any of these options");

  CodecOptions enc;
  CLI::App* e = app.add_subcommand("encode", "Tokenize text, one output line per input line");
  e->add_option("--model", enc.model, "Model file")->required();
  e->add_option("input", enc.input, "Input file (default stdin)");
  e->add_flag("--ids", enc.ids, "Print token ids instead of escaped tokens");

  CodecOptions dec;
  CLI::App* d = app.add_subcommand("decode", "Reassemble text from encode output");
  d->add_option("--model", dec.model, "Model file")->required();
  d->add_option("input", dec.input, "Input file (default stdin)");
  d->add_flag("--ids", dec.ids, "Input holds token ids");

  EvalOptions ev;
  CLI::App* v = app.add_subcommand("eval", "Intrinsic metrics on a parallel dev corpus");
  v->add_option("--model", ev.model, "Model file")->required();
  v->add_option("--dev", ev.dev, "Directory of line-aligned <lang>.txt files")->required();
  v->add_option("--gold", ev.gold, "Directory of <lang>.tsv gold segmentations");
  v->add_option("--out", ev.out, "Report JSON (default stdout)");
  v->add_option("--csv", ev.csv, "Also write a scope,metric,value CSV");

  CompareOptions cmp;
  CLI::App* c = app.add_subcommand("compare", "Side-by-side metrics for several models");
  c->add_option("models", cmp.models, "Model files")->required();
  c->add_option("--dev", cmp.dev, "Directory of line-aligned <lang>.txt files")->required();
  c->add_option("--csv", cmp.csv, "Also write the table as CSV");

  SynthOptions syn;
  CLI::App* s = app.add_subcommand("synth", "Generate a synthetic multilingual corpus");
  s->add_option("--spec", syn.spec, "Synthetic spec JSON (default: three scripts, 0.80/0.15/0.05)");
  s->add_option("--seed", syn.seed, "Random seed")->capture_default_str();
  s->add_option("--out", syn.out, "Output directory")->required();
  s->add_option("--train-bytes", syn.train_bytes, "Override the training size in bytes");
  s->add_option("--dev-lines", syn.dev_lines, "Override the number of dev lines");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (t->parsed()) cmd_train(*t, train, out);
    else if (e->parsed()) cmd_encode(enc, in, out);
    else if (d->parsed()) cmd_decode(dec, in, out);
    else if (v->parsed()) cmd_eval(ev, out);
    else if (c->parsed()) cmd_compare(cmp, out, err);
    else if (s->parsed()) cmd_synth(syn, out);
    out.flush();
    return kExitOk;
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const DataError& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitData;
  } catch (const InvariantError& ex) {
    err << "internal error: " << ex.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace pbpe
