#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "pbpe/corpus.hpp"
#include "pbpe/tokenizer.hpp"
#include "pbpe/trainer.hpp"

namespace pbpe {

// Non-negative rational with a positive denominator. Parsed from decimal text
// so that the window quota is evaluated exactly.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  // Accepts "2", "1.5", "0.125", "3/2". Throws UsageError otherwise.
  static Rational parse(std::string_view text);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string to_string() const;
  friend bool operator==(const Rational&, const Rational&) = default;
};

enum class DevSource { kParallelDev, kTrainingAsDev };

struct ParityConfig {
  std::size_t total_merges = 0;
  // Merges learned with the global objective before parity selection starts.
  std::size_t hybrid_global_merges = 0;
  // Moving-window length; 0 disables the window.
  std::size_t window_size = 0;
  Rational alpha{2, 1};
  NormUnit unit = NormUnit::kLines;
  DevSource dev_source = DevSource::kParallelDev;

  // Throws UsageError when the fields are inconsistent.
  void validate() const;

  // W = 100, alpha = 2, first half of the budget global.
  static ParityConfig window_hybrid_defaults(std::size_t total_merges);
};

// The most recent `capacity` parity selections.
class SelectionWindow {
 public:
  explicit SelectionWindow(std::size_t capacity) : capacity_(capacity) {}

  void push(const LanguageId& lang);
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return recent_.size(); }
  // Occurrences of `lang` among the newest `last_n` entries.
  std::size_t count(const LanguageId& lang, std::size_t last_n) const;

 private:
  std::size_t capacity_;
  std::deque<LanguageId> recent_;
};

// Whether selecting `lang` now would leave it more than alpha * W / |L| times
// in the window (the window after the selection is pushed).
bool exceeds_quota(const SelectionWindow& window, const LanguageId& lang, const Rational& alpha,
                   std::size_t num_languages);

struct LanguageChoice {
  // Candidates in the order they should be tried: window-allowed languages by
  // ascending CR (ties by code), then excluded languages likewise.
  std::vector<std::size_t> order;
  std::size_t num_allowed = 0;
};

// Ranks the CR table's languages for the next parity step.
LanguageChoice rank_languages(const CRTable& table, const SelectionWindow& window, const Rational& alpha);

// Argmin-CR language after window filtering; if every language is excluded,
// the unfiltered argmin.
LanguageId select_language(const CRTable& table, const SelectionWindow& window, const ParityConfig& config);

// CR of each dev language under `model`, computed from scratch (ratio of sums).
CRTable compute_cr(const ParallelDevCorpus& dev, const TokenizerModel& model, NormUnit unit);
CRTable compute_cr(const LabeledCorpus& corpus, const TokenizerModel& model, NormUnit unit);

// Parity-aware training with CR measured on `dev`.
TrainResult train_parity(const LabeledCorpus& train, const ParallelDevCorpus& dev, const ParityConfig& config,
                         const StepObserver& observer = {});

// Parity-aware training with CR measured on the training shards in bytes.
TrainResult train_no_dev(const LabeledCorpus& train, const ParityConfig& config,
                         const StepObserver& observer = {});

}  // namespace pbpe
