#include "pbpe/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pbpe/error.hpp"

namespace pbpe {

namespace fs = std::filesystem;
using json = nlohmann::json;

LanguageId::LanguageId(std::string code) : code_(std::move(code)) {
  if (code_.empty()) throw DataError("language code must be non-empty");
}

std::string_view to_string(NormUnit unit) {
  switch (unit) {
    case NormUnit::kBytes: return "bytes";
    case NormUnit::kChars: return "chars";
    case NormUnit::kWords: return "words";
    case NormUnit::kLines: return "lines";
  }
  return "?";
}

NormUnit parse_norm_unit(std::string_view name) {
  for (NormUnit u : kAllNormUnits) {
    if (to_string(u) == name) return u;
  }
  throw UsageError("unknown normalization unit '" + std::string(name) +
                   "' (expected bytes, chars, words or lines)");
}

std::vector<BytesView> pretokenize(BytesView text) {
  std::vector<BytesView> out;
  std::size_t start = 0;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    // A pre-token is: whitespace run, then non-whitespace run.
    while (i < n && is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
    while (i < n && !is_space_byte(static_cast<unsigned char>(text[i]))) ++i;
    out.push_back(text.substr(start, i - start));
    start = i;
  }
  return out;
}

bool is_word(BytesView pretoken) {
  return std::any_of(pretoken.begin(), pretoken.end(),
                     [](char c) { return !is_space_byte(static_cast<unsigned char>(c)); });
}

UnitCount unit_length(BytesView text, NormUnit unit) {
  switch (unit) {
    case NormUnit::kBytes:
      return {text.size(), false};
    case NormUnit::kChars: {
      if (auto n = utf8_scalar_count(text)) return {*n, false};
      return {text.size(), true};
    }
    case NormUnit::kWords: {
      std::uint64_t words = 0;
      for (BytesView p : pretokenize(text)) words += is_word(p) ? 1 : 0;
      return {words, false};
    }
    case NormUnit::kLines:
      return {text.empty() ? 0u : 1u, false};
  }
  return {};
}

void UnitTotals::add_record(BytesView text) {
  for (NormUnit u : kAllNormUnits) {
    const UnitCount c = unit_length(text, u);
    values[static_cast<std::size_t>(u)] += c.value;
    utf8_fallback = utf8_fallback || c.utf8_fallback;
  }
}

void UnitTotals::merge(const UnitTotals& other) {
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
  utf8_fallback = utf8_fallback || other.utf8_fallback;
}

void WordMultiset::add(BytesView pretoken, std::uint64_t n) {
  if (n == 0) return;
  counts[Bytes(pretoken)] += n;
}

void WordMultiset::merge(const WordMultiset& other) {
  for (const auto& [word, n] : other.counts) counts[word] += n;
}

std::uint64_t WordMultiset::total() const {
  std::uint64_t t = 0;
  for (const auto& [word, n] : counts) t += n;
  return t;
}

std::vector<LanguageId> LabeledCorpus::languages() const {
  std::vector<LanguageId> out;
  out.reserve(per_language.size());
  for (const auto& [lang, shard] : per_language) out.push_back(lang);
  return out;
}

const LanguageShard& LabeledCorpus::shard(const LanguageId& lang) const {
  auto it = per_language.find(lang);
  if (it == per_language.end()) throw DataError("language '" + lang.code() + "' not in corpus");
  return it->second;
}

bool LabeledCorpus::empty() const {
  return std::all_of(per_language.begin(), per_language.end(),
                     [](const auto& kv) { return kv.second.words.counts.empty(); });
}

void add_record(LabeledCorpus& corpus, const LanguageId& lang, BytesView text) {
  LanguageShard& shard = corpus.per_language[lang];
  for (BytesView p : pretokenize(text)) shard.words.add(p);
  shard.totals.add_record(text);
  ++shard.records;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits on '\n'; a final newline does not produce an empty trailing record.
std::vector<std::string_view> split_lines(std::string_view data) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < data.size()) {
    std::size_t nl = data.find('\n', start);
    if (nl == std::string_view::npos) nl = data.size();
    lines.push_back(data.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace

LabeledCorpus load_labeled_corpus(const fs::path& manifest,
                                  std::optional<std::uint64_t> limit_per_language) {
  json doc;
  try {
    doc = json::parse(read_file(manifest));
  } catch (const json::parse_error& e) {
    throw DataError("malformed manifest " + manifest.string() + ": " + e.what());
  }
  if (!doc.contains("languages") || !doc["languages"].is_array()) {
    throw DataError("manifest " + manifest.string() + " lacks a 'languages' array");
  }

  std::vector<std::pair<LanguageId, fs::path>> entries;
  for (const auto& item : doc["languages"]) {
    if (!item.is_object() || !item.contains("lang") || !item.contains("path") ||
        !item["lang"].is_string() || !item["path"].is_string()) {
      throw DataError("manifest entries need string fields 'lang' and 'path'");
    }
    LanguageId lang(item["lang"].get<std::string>());
    for (const auto& [seen, p] : entries) {
      if (seen == lang) throw DataError("language '" + lang.code() + "' listed twice in manifest");
    }
    entries.emplace_back(std::move(lang), manifest.parent_path() / item["path"].get<std::string>());
  }

  LabeledCorpus corpus;
  for (const auto& [lang, path] : entries) corpus.per_language[lang];

  for (const auto& [declared, path] : entries) {
    const std::string data = read_file(path);
    std::size_t line_no = 0;
    for (std::string_view line : split_lines(data)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error& e) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
      }
      if (!rec.is_object() || !rec.contains("text") || !rec.contains("lang") ||
          !rec["text"].is_string() || !rec["lang"].is_string()) {
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": record needs string fields 'text' and 'lang'");
      }
      const LanguageId lang(rec["lang"].get<std::string>());
      auto it = corpus.per_language.find(lang);
      if (it == corpus.per_language.end()) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown language '" +
                        lang.code() + "' (not in manifest)");
      }
      if (limit_per_language && it->second.records >= *limit_per_language) continue;
      add_record(corpus, lang, rec["text"].get_ref<const std::string&>());
    }
  }

  for (const auto& [lang, shard] : corpus.per_language) {
    if (shard.records == 0) throw DataError("empty language partition: '" + lang.code() + "'");
  }
  return corpus;
}

const std::vector<Bytes>& ParallelDevCorpus::lines_for(const LanguageId& lang) const {
  for (std::size_t i = 0; i < languages.size(); ++i) {
    if (languages[i] == lang) return lines[i];
  }
  throw DataError("language '" + lang.code() + "' not in dev corpus");
}

void ParallelDevCorpus::validate() const {
  if (languages.size() != lines.size()) throw InvariantError("dev corpus language/line table mismatch");
  if (languages.empty()) throw DataError("dev corpus has no languages");
  bool aligned = true;
  for (const auto& l : lines) aligned = aligned && l.size() == lines.front().size();
  if (!aligned) {
    std::string msg = "dev corpus line counts differ:";
    for (std::size_t i = 0; i < languages.size(); ++i) {
      msg += " " + languages[i].code() + "=" + std::to_string(lines[i].size());
    }
    throw DataError(msg);
  }
  for (std::size_t i = 0; i < languages.size(); ++i) {
    for (std::size_t j = 0; j < lines[i].size(); ++j) {
      if (!is_word(lines[i][j])) {
        throw DataError("dev corpus " + languages[i].code() + " line " + std::to_string(j + 1) +
                        " is blank");
      }
    }
  }
}

ParallelDevCorpus load_parallel_dev(const fs::path& dir, const std::vector<LanguageId>& languages) {
  ParallelDevCorpus dev;
  for (const auto& lang : languages) {
    const fs::path path = dir / (lang.code() + ".txt");
    if (!fs::exists(path)) throw DataError("missing dev file for '" + lang.code() + "': " + path.string());
    const std::string data = read_file(path);
    std::vector<Bytes> lines;
    for (std::string_view l : split_lines(data)) lines.emplace_back(l);
    dev.languages.push_back(lang);
    dev.lines.push_back(std::move(lines));
  }
  dev.validate();
  return dev;
}

std::vector<LanguageId> discover_dev_languages(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dev directory not found: " + dir.string());
  std::vector<LanguageId> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      out.emplace_back(entry.path().stem().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace pbpe
