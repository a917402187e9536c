#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "pbpe/corpus.hpp"
#include "pbpe/error.hpp"

namespace pbpe {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Splits a UTF-8 string into code point byte sequences.
std::vector<std::string> split_code_points(const std::string& text, const std::string& lang) {
  if (!utf8_scalar_count(text)) throw UsageError("alphabet of '" + lang + "' is not valid UTF-8");
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b = static_cast<unsigned char>(text[i]);
    const std::size_t len = b < 0x80 ? 1 : (b & 0xe0) == 0xc0 ? 2 : (b & 0xf0) == 0xe0 ? 3 : 4;
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

// The standard fixes mt19937_64's output sequence but not the distributions'
// algorithms, so the draws below are written out to keep corpora identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi].
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) {
    const std::uint64_t span = hi - lo + 1;
    return lo + static_cast<std::uint64_t>(uniform() * static_cast<double>(span));
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class ZipfSampler {
 public:
  ZipfSampler(std::uint32_t n, double exponent) : cdf_(n) {
    double acc = 0.0;
    for (std::uint32_t r = 0; r < n; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
      cdf_[r] = acc;
    }
    for (double& c : cdf_) c /= acc;
  }

  std::uint32_t operator()(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<std::uint32_t>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

std::vector<std::string> build_inventory(const SyntheticLanguage& lang, std::uint32_t concepts,
                                         Rng& rng) {
  const auto alphabet = split_code_points(lang.alphabet, lang.lang);
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  words.reserve(concepts);
  std::uint64_t attempts = 0;
  while (words.size() < concepts) {
    if (++attempts > 1000ULL * concepts) {
      throw UsageError("alphabet/word-length range of '" + lang.lang + "' cannot supply " +
                       std::to_string(concepts) + " distinct words");
    }
    const auto len = rng.between(lang.min_word_chars, lang.max_word_chars);
    std::string w;
    for (std::uint64_t k = 0; k < len; ++k) w += alphabet[rng.between(0, alphabet.size() - 1)];
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

std::vector<std::uint32_t> draw_message(const SyntheticSpec& spec, const ZipfSampler& zipf, Rng& rng) {
  const auto n = rng.between(spec.min_words_per_line, spec.max_words_per_line);
  std::vector<std::uint32_t> msg(n);
  for (auto& c : msg) c = zipf(rng);
  return msg;
}

std::string render(const std::vector<std::uint32_t>& message, const std::vector<std::string>& inventory) {
  std::string line;
  for (std::size_t i = 0; i < message.size(); ++i) {
    if (i) line += ' ';
    line += inventory[message[i]];
  }
  return line;
}

std::string jsonl_record(const std::string& text, const std::string& lang) {
  return json{{"text", text}, {"lang", lang}}.dump(-1, ' ', false, json::error_handler_t::strict);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (languages.empty()) throw UsageError("synthetic spec lists no languages");
  if (concepts == 0) throw UsageError("synthetic spec needs concepts > 0");
  if (!(zipf_exponent > 0.0)) throw UsageError("zipf_exponent must be positive");
  if (min_words_per_line == 0 || min_words_per_line > max_words_per_line) {
    throw UsageError("words-per-line range must satisfy 1 <= min <= max");
  }
  double sum = 0.0;
  std::map<std::string, std::string> owner;  // code point -> language
  std::set<std::string> codes;
  for (const auto& l : languages) {
    if (l.lang.empty()) throw UsageError("synthetic language with empty code");
    if (!codes.insert(l.lang).second) throw UsageError("language '" + l.lang + "' listed twice");
    if (!(l.proportion > 0.0)) throw UsageError("proportion of '" + l.lang + "' must be positive");
    if (l.min_word_chars == 0 || l.min_word_chars > l.max_word_chars) {
      throw UsageError("word-length range of '" + l.lang + "' must satisfy 1 <= min <= max");
    }
    sum += l.proportion;
    const auto cps = split_code_points(l.alphabet, l.lang);
    if (cps.empty()) throw UsageError("alphabet of '" + l.lang + "' is empty");
    for (const auto& cp : cps) {
      if (cp.size() == 1 && is_space_byte(static_cast<unsigned char>(cp[0]))) {
        throw UsageError("alphabet of '" + l.lang + "' contains whitespace");
      }
      auto [it, inserted] = owner.emplace(cp, l.lang);
      if (!inserted) {
        throw UsageError(it->second == l.lang
                             ? "alphabet of '" + l.lang + "' repeats a character"
                             : "alphabets of '" + it->second + "' and '" + l.lang + "' overlap");
      }
    }
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw UsageError("language proportions sum to " + std::to_string(sum) + ", expected 1");
  }
}

SyntheticSpec parse_synthetic_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("malformed synthetic spec: ") + e.what());
  }
  SyntheticSpec spec;
  try {
    spec.concepts = doc.value("concepts", spec.concepts);
    spec.zipf_exponent = doc.value("zipf_exponent", spec.zipf_exponent);
    spec.train_bytes = doc.value("train_bytes", spec.train_bytes);
    spec.dev_lines = doc.value("dev_lines", spec.dev_lines);
    spec.min_words_per_line = doc.value("min_words_per_line", spec.min_words_per_line);
    spec.max_words_per_line = doc.value("max_words_per_line", spec.max_words_per_line);
    for (const auto& item : doc.at("languages")) {
      SyntheticLanguage l;
      l.lang = item.at("lang").get<std::string>();
      l.alphabet = item.at("alphabet").get<std::string>();
      l.proportion = item.at("proportion").get<double>();
      l.min_word_chars = item.value("min_word_chars", l.min_word_chars);
      l.max_word_chars = item.value("max_word_chars", l.max_word_chars);
      spec.languages.push_back(std::move(l));
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SyntheticSpec load_synthetic_spec(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open synthetic spec " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_synthetic_spec(ss.str());
}

SyntheticSpec default_synthetic_spec(std::vector<double> proportions, std::uint64_t train_bytes,
                                     std::uint32_t dev_lines) {
  static const std::string kLatin = "abcdefghijklmnopqrstuvwxyz";
  static const std::string kCyrillic = "абвгдежзийклмнопрстуфхцчшщъыьэюя";
  static const std::string kHan =
      "的一是不了人我在有他这中大来上国个到说们为子和你地出道也时年得就那要下以生会自着去之过家学对可"
      "里后小么心多天而能好都然没日于起还发成事只作当想看文无开手十用主行方又如前所本见经头面公同三已老"
      "从动两长知民样现分将外但身些与高意进把法此实回二理美点月明其种声全工己话儿者向情部正名定女问力机";
  static const std::vector<SyntheticLanguage> kTemplates{
      {"lat", kLatin, 0.0, 2, 9},
      {"cyr", kCyrillic, 0.0, 3, 10},
      {"han", kHan, 0.0, 1, 3},
  };
  if (proportions.empty() || proportions.size() > kTemplates.size()) {
    throw UsageError("default synthetic spec supports 1 to 3 languages");
  }
  SyntheticSpec spec;
  spec.train_bytes = train_bytes;
  spec.dev_lines = dev_lines;
  for (std::size_t i = 0; i < proportions.size(); ++i) {
    SyntheticLanguage l = kTemplates[i];
    l.proportion = proportions[i];
    spec.languages.push_back(std::move(l));
  }
  spec.validate();
  return spec;
}

SyntheticCorpus render_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const ZipfSampler zipf(spec.concepts, spec.zipf_exponent);
  const std::size_t n_lang = spec.languages.size();

  std::vector<std::vector<std::string>> inventories;
  for (std::size_t i = 0; i < n_lang; ++i) {
    Rng rng(stream_seed(seed, 100 + i));
    inventories.push_back(build_inventory(spec.languages[i], spec.concepts, rng));
  }

  SyntheticCorpus out;
  out.train.resize(n_lang);
  out.dev.resize(n_lang);
  for (const auto& l : spec.languages) out.languages.emplace_back(l.lang);

  Rng dev_rng(stream_seed(seed, 0));
  for (std::uint32_t j = 0; j < spec.dev_lines; ++j) {
    const auto msg = draw_message(spec, zipf, dev_rng);
    for (std::size_t i = 0; i < n_lang; ++i) out.dev[i].push_back(render(msg, inventories[i]));
  }

  for (std::size_t i = 0; i < n_lang; ++i) {
    Rng rng(stream_seed(seed, 200 + i));
    const double target = spec.languages[i].proportion * static_cast<double>(spec.train_bytes);
    double total = 0.0;
    while (true) {
      std::string line = render(draw_message(spec, zipf, rng), inventories[i]);
      const double next = total + static_cast<double>(line.size());
      // Stop at whichever side of the target is closer.
      if (std::abs(next - target) >= std::abs(total - target)) break;
      total = next;
      out.train[i].push_back(std::move(line));
    }
  }
  return out;
}

SyntheticFiles generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed, const fs::path& out_dir) {
  const SyntheticCorpus corpus = render_synthetic(spec, seed);
  SyntheticFiles files;
  files.manifest = out_dir / "manifest.json";
  files.dev_dir = out_dir / "dev";
  fs::create_directories(out_dir / "train");
  fs::create_directories(files.dev_dir);

  json manifest;
  manifest["languages"] = json::array();
  for (std::size_t i = 0; i < corpus.languages.size(); ++i) {
    const std::string& code = corpus.languages[i].code();
    const std::string rel = "train/" + code + ".jsonl";
    std::ofstream train(out_dir / rel, std::ios::binary);
    std::uint64_t bytes = 0;
    for (const auto& line : corpus.train[i]) {
      train << jsonl_record(line, code) << '\n';
      bytes += line.size();
    }
    files.train_bytes[corpus.languages[i]] = bytes;
    manifest["languages"].push_back({{"lang", code}, {"path", rel}});

    std::ofstream dev(files.dev_dir / (code + ".txt"), std::ios::binary);
    for (const auto& line : corpus.dev[i]) dev << line << '\n';
    if (!train || !dev) throw DataError("failed writing synthetic corpus under " + out_dir.string());
  }
  std::ofstream m(files.manifest, std::ios::binary);
  m << manifest.dump(2) << '\n';
  if (!m) throw DataError("failed writing " + files.manifest.string());
  return files;
}

LabeledCorpus to_labeled_corpus(const SyntheticCorpus& corpus) {
  LabeledCorpus out;
  for (std::size_t i = 0; i < corpus.languages.size(); ++i) {
    out.per_language[corpus.languages[i]];
    for (const auto& line : corpus.train[i]) add_record(out, corpus.languages[i], line);
  }
  return out;
}

ParallelDevCorpus to_parallel_dev(const SyntheticCorpus& corpus) {
  ParallelDevCorpus dev{corpus.languages, corpus.dev};
  dev.validate();
  return dev;
}

}  // namespace pbpe
