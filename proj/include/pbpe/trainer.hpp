#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pbpe/corpus.hpp"
#include "pbpe/tokenizer.hpp"

namespace pbpe {

// Pairs seen fewer times than this are never merged.
inline constexpr std::uint64_t kMinPairCount = 2;

struct LangCount {
  std::uint32_t lang = 0;  // index into the trainer's language list
  std::uint64_t count = 0;
};

// A distinct pre-token, its current segmentation and its multiplicity in each
// language.
struct TrainingWord {
  Bytes bytes;
  std::vector<TokenId> tokens;
  std::vector<LangCount> counts;
};

struct PairChoice {
  TokenId left = 0;
  TokenId right = 0;
  std::uint64_t count = 0;
};

// Pair -> weighted occurrence count, with an index ordered by
// (count desc, left bytes asc, right bytes asc) for argmax queries.
class PairCounts {
 public:
  explicit PairCounts(const TokenizerModel* vocab);
  PairCounts(const PairCounts&) = delete;
  PairCounts& operator=(const PairCounts&) = delete;
  PairCounts(PairCounts&&) = default;

  void add(std::uint64_t key, std::int64_t delta);
  std::uint64_t get(std::uint64_t key) const;
  const std::unordered_map<std::uint64_t, std::uint64_t>& all() const { return counts_; }

  // Best pair with count >= kMinPairCount that the model does not already
  // merge; nullopt if there is none.
  std::optional<PairChoice> best() const;

 private:
  struct Entry {
    std::uint64_t count;
    TokenId left;
    TokenId right;
  };
  struct Order {
    const TokenizerModel* vocab;
    bool operator()(const Entry& a, const Entry& b) const;
  };

  const TokenizerModel* vocab_;
  std::unordered_map<std::uint64_t, std::uint64_t> counts_;
  std::set<Entry, Order> order_;
};

// Per-language unit totals and current token totals; cr = unit / tokens.
struct CRTable {
  NormUnit unit = NormUnit::kLines;
  std::vector<LanguageId> languages;
  std::vector<std::uint64_t> unit_totals;
  std::vector<std::uint64_t> token_totals;

  double cr(std::size_t i) const {
    return static_cast<double>(unit_totals[i]) / static_cast<double>(token_totals[i]);
  }
  std::optional<std::size_t> index_of(const LanguageId& lang) const;
  // Exact comparison of cr(a) < cr(b) by cross-multiplication.
  bool cr_less(std::size_t a, std::size_t b) const;
  friend bool operator==(const CRTable&, const CRTable&) = default;
};

// Segmentations of a set of words, updated merge by merge. Optionally keeps
// per-language and global pair counts in sync.
class WordTable {
 public:
  WordTable(std::size_t num_languages, const TokenizerModel* vocab, bool track_pairs);

  void add_word(BytesView bytes, std::uint32_t lang, std::uint64_t count);

  // Replaces every non-overlapping left-to-right occurrence of (left, right)
  // with `result`. Returns replacements per language, weighted by multiplicity.
  std::vector<std::uint64_t> apply_merge(TokenId left, TokenId right, TokenId result);

  const std::vector<TrainingWord>& words() const { return words_; }
  const std::vector<std::uint64_t>& token_totals() const { return token_totals_; }
  const PairCounts& language_pairs(std::size_t lang) const { return lang_pairs_.at(lang); }
  const PairCounts& global_pairs() const { return global_pairs_; }
  bool tracks_pairs() const { return track_pairs_; }

 private:
  void index_pairs(std::uint32_t word_id, const std::vector<TokenId>& tokens);

  std::size_t num_languages_;
  bool track_pairs_;
  std::vector<TrainingWord> words_;
  std::unordered_map<Bytes, std::uint32_t> word_ids_;
  std::vector<std::uint64_t> token_totals_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> where_;
  std::vector<PairCounts> lang_pairs_;
  PairCounts global_pairs_;
};

struct TrainLogEntry {
  std::size_t step = 0;  // 1-based
  Bytes left;
  Bytes right;
  std::uint64_t count = 0;  // pair count that won the selection
  std::uint64_t replacements = 0;
  bool parity_step = false;
  std::optional<LanguageId> lang;
  std::map<LanguageId, double> cr_snapshot;  // CR before this merge
  bool fallback = false;                     // window excluded every language
  std::vector<LanguageId> skipped;           // chosen but had no eligible pair
};

enum class StopReason { kBudgetReached, kNoEligiblePair };

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  StopReason stop = StopReason::kBudgetReached;
};

std::string train_log_to_jsonl(const TrainLog& log);

// Training corpus, optional CR corpus and the model being learned.
class TrainerState {
 public:
  // Throws DataError on an empty corpus.
  explicit TrainerState(const LabeledCorpus& corpus);
  TrainerState(const TrainerState&) = delete;
  TrainerState& operator=(const TrainerState&) = delete;

  // Tracks CR on a parallel dev corpus in `unit`. Every dev language must be
  // a training language; training languages absent from dev are never
  // selected by parity steps.
  void attach_dev(const ParallelDevCorpus& dev, NormUnit unit);
  // Tracks CR on the training shards with bytes as the unit.
  void attach_training_as_dev();

  const std::vector<LanguageId>& languages() const { return languages_; }
  std::optional<std::size_t> language_index(const LanguageId& lang) const;
  const TokenizerModel& model() const { return *model_; }
  const WordTable& train_words() const { return *train_; }

  std::optional<PairChoice> select_global() const { return train_->global_pairs().best(); }
  std::optional<PairChoice> select_in_language(std::size_t lang) const {
    return train_->language_pairs(lang).best();
  }

  struct ApplyResult {
    bool applied = false;  // false: pair absent, nothing changed
    std::uint64_t replacements = 0;
    std::vector<std::uint64_t> per_language;
  };
  // Adds (left, right) to the model and applies it to the training words and
  // the CR corpus. A pair with no occurrences is left out of the model.
  ApplyResult apply_merge(TokenId left, TokenId right);

  bool has_cr() const { return cr_.has_value(); }
  // Current CR table; throws InvariantError if no CR corpus is attached.
  CRTable cr_table() const;

  // Pair counts keyed by token bytes; lang = nullopt gives the global sum.
  std::map<std::pair<Bytes, Bytes>, std::uint64_t> pair_counts(std::optional<std::size_t> lang) const;

 private:
  struct CrSource {
    NormUnit unit;
    std::vector<std::uint64_t> unit_totals;  // per language
    std::vector<bool> present;
    std::unique_ptr<WordTable> dev;  // null when the training table is used
  };

  std::vector<LanguageId> languages_;
  std::unique_ptr<TokenizerModel> model_;
  std::unique_ptr<WordTable> train_;
  std::optional<CrSource> cr_;
};

using StepObserver = std::function<void(const TrainerState&, const TrainLogEntry&)>;

struct TrainResult {
  TokenizerModel model;
  TrainLog log;
};

// Greedy BPE over the whole corpus: at most `merges` merges, fewer if no pair
// reaches kMinPairCount.
TrainResult train_classical(const LabeledCorpus& corpus, std::size_t merges,
                            const StepObserver& observer = {});

}  // namespace pbpe
