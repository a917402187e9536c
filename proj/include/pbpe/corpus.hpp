#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pbpe/bytes.hpp"

namespace pbpe {

class LanguageId {
 public:
  LanguageId() = default;
  explicit LanguageId(std::string code);

  const std::string& code() const { return code_; }
  auto operator<=>(const LanguageId&) const = default;

 private:
  std::string code_;
};

enum class NormUnit : std::uint8_t { kBytes = 0, kChars = 1, kWords = 2, kLines = 3 };

inline constexpr std::array<NormUnit, 4> kAllNormUnits{NormUnit::kBytes, NormUnit::kChars,
                                                       NormUnit::kWords, NormUnit::kLines};

std::string_view to_string(NormUnit unit);
// Accepts "bytes", "chars", "words", "lines"; throws UsageError otherwise.
NormUnit parse_norm_unit(std::string_view name);

// Splits before every whitespace run; the run is carried as the prefix of the
// following pre-token. A trailing run with nothing after it forms its own
// pre-token. The returned views point into `text`.
std::vector<BytesView> pretokenize(BytesView text);

// Whether a pre-token counts as a word (contains a non-whitespace byte).
bool is_word(BytesView pretoken);

struct UnitCount {
  std::uint64_t value = 0;
  // Set when unit == kChars and the input was not valid UTF-8; `value` is
  // then the byte count.
  bool utf8_fallback = false;
};

// Length of one record in the given unit. `lines` is 1 for any non-empty
// record and 0 for the empty one.
UnitCount unit_length(BytesView text, NormUnit unit);

// Totals for every unit over a set of records.
struct UnitTotals {
  std::array<std::uint64_t, 4> values{};
  bool utf8_fallback = false;

  std::uint64_t operator[](NormUnit unit) const { return values[static_cast<std::size_t>(unit)]; }
  void add_record(BytesView text);
  void merge(const UnitTotals& other);
  friend bool operator==(const UnitTotals&, const UnitTotals&) = default;
};

struct WordMultiset {
  std::map<Bytes, std::uint64_t> counts;

  void add(BytesView pretoken, std::uint64_t n = 1);
  void merge(const WordMultiset& other);
  std::uint64_t total() const;
  friend bool operator==(const WordMultiset&, const WordMultiset&) = default;
};

struct LanguageShard {
  WordMultiset words;
  UnitTotals totals;
  std::uint64_t records = 0;
};

// Language-labelled training text, aggregated into pre-token multisets.
struct LabeledCorpus {
  std::map<LanguageId, LanguageShard> per_language;

  std::vector<LanguageId> languages() const;
  const LanguageShard& shard(const LanguageId& lang) const;
  bool empty() const;
};

// Adds one record to the shard of `lang`, creating it if needed.
void add_record(LabeledCorpus& corpus, const LanguageId& lang, BytesView text);

// Reads manifest.json ({"languages":[{"lang":..,"path":..}]}); paths are
// relative to the manifest's directory. Each path is JSONL with {text, lang}
// records. `limit_per_language` caps the number of records kept per language.
LabeledCorpus load_labeled_corpus(const std::filesystem::path& manifest,
                                  std::optional<std::uint64_t> limit_per_language = std::nullopt);

// Line-aligned multilingual corpus: lines[i][j] is line j of languages[i].
struct ParallelDevCorpus {
  std::vector<LanguageId> languages;
  std::vector<std::vector<Bytes>> lines;

  std::size_t num_lines() const { return lines.empty() ? 0 : lines.front().size(); }
  const std::vector<Bytes>& lines_for(const LanguageId& lang) const;
  // Throws DataError if the per-language line counts differ or a line is blank.
  void validate() const;
};

// Reads <dir>/<lang>.txt for every language. The trailing newline of the file
// does not start a new record; lines are otherwise kept raw.
ParallelDevCorpus load_parallel_dev(const std::filesystem::path& dir,
                                    const std::vector<LanguageId>& languages);

// Languages for which <dir>/<lang>.txt exists, sorted by code.
std::vector<LanguageId> discover_dev_languages(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Synthetic multilingual corpora.
//
// Every language renders the same concept space with its own word inventory.
// A "message" is a sequence of concept ids drawn from a Zipf distribution;
// dev line j is message j rendered in every language, so dev lines are
// content-aligned. Training records are independent messages, rendered in
// one language each, until that language's share of `train_bytes` is reached.

struct SyntheticLanguage {
  std::string lang;
  std::string alphabet;  // UTF-8; one entry per code point; no whitespace
  double proportion = 0.0;
  std::uint32_t min_word_chars = 2;
  std::uint32_t max_word_chars = 8;
};

struct SyntheticSpec {
  std::vector<SyntheticLanguage> languages;
  std::uint32_t concepts = 2000;
  double zipf_exponent = 1.1;
  std::uint64_t train_bytes = 1'000'000;
  std::uint32_t dev_lines = 100;
  std::uint32_t min_words_per_line = 4;
  std::uint32_t max_words_per_line = 16;

  // Throws UsageError on overlapping alphabets, bad proportions, or bad ranges.
  void validate() const;
};

SyntheticSpec parse_synthetic_spec(std::string_view json_text);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

// Three-language default (ASCII, 2-byte, 3-byte scripts) with the given
// proportions; used by tests and `synth` when no spec file is given.
SyntheticSpec default_synthetic_spec(std::vector<double> proportions = {0.80, 0.15, 0.05},
                                     std::uint64_t train_bytes = 400'000,
                                     std::uint32_t dev_lines = 100);

struct SyntheticCorpus {
  std::vector<LanguageId> languages;
  std::vector<std::vector<Bytes>> train;  // per language, in generation order
  std::vector<std::vector<Bytes>> dev;    // per language, aligned
};

SyntheticCorpus render_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

struct SyntheticFiles {
  std::filesystem::path manifest;
  std::filesystem::path dev_dir;
  std::map<LanguageId, std::uint64_t> train_bytes;  // raw text bytes per language
};

// Writes <out>/train/<lang>.jsonl, <out>/manifest.json and <out>/dev/<lang>.txt.
SyntheticFiles generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                  const std::filesystem::path& out_dir);

LabeledCorpus to_labeled_corpus(const SyntheticCorpus& corpus);
ParallelDevCorpus to_parallel_dev(const SyntheticCorpus& corpus);

}  // namespace pbpe

template <>
struct std::hash<pbpe::LanguageId> {
  std::size_t operator()(const pbpe::LanguageId& id) const noexcept {
    return std::hash<std::string>{}(id.code());
  }
};
