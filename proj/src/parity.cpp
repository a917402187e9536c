#include "pbpe/parity.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

#include "pbpe/error.hpp"

namespace pbpe {

Rational Rational::parse(std::string_view text) {
  auto fail = [&]() -> Rational {
    throw UsageError("expected a non-negative decimal or fraction, got '" + std::string(text) + "'");
  };
  auto parse_int = [&](std::string_view digits, std::int64_t& out) {
    if (digits.empty()) return false;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out);
    return ec == std::errc() && ptr == digits.data() + digits.size() && out >= 0;
  };

  Rational r;
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    if (!parse_int(text.substr(0, slash), r.num) || !parse_int(text.substr(slash + 1), r.den) || r.den == 0) {
      return fail();
    }
  } else {
    const auto dot = text.find('.');
    const std::string_view whole = text.substr(0, dot);
    const std::string_view frac = dot == std::string_view::npos ? std::string_view() : text.substr(dot + 1);
    if (frac.size() > 12 || (dot != std::string_view::npos && frac.empty())) return fail();
    std::int64_t w = 0;
    std::int64_t f = 0;
    if (!parse_int(whole, w) || (!frac.empty() && !parse_int(frac, f))) return fail();
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    if (w > (INT64_MAX - f) / scale) return fail();
    r.num = w * scale + f;
    r.den = scale;
  }
  const std::int64_t g = std::gcd(r.num, r.den);
  if (g > 1) {
    r.num /= g;
    r.den /= g;
  }
  return r;
}

std::string Rational::to_string() const {
  return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
}

void ParityConfig::validate() const {
  if (hybrid_global_merges > total_merges) {
    throw UsageError("hybrid global merges (" + std::to_string(hybrid_global_merges) +
                     ") exceed the merge budget (" + std::to_string(total_merges) + ")");
  }
  if (alpha.num <= 0 || alpha.den <= 0) throw UsageError("alpha must be positive");
  if (dev_source == DevSource::kTrainingAsDev && unit != NormUnit::kBytes) {
    throw UsageError("training-as-dev compression is measured in bytes; got unit " +
                     std::string(pbpe::to_string(unit)));
  }
}

ParityConfig ParityConfig::window_hybrid_defaults(std::size_t total_merges) {
  ParityConfig c;
  c.total_merges = total_merges;
  c.hybrid_global_merges = total_merges / 2;
  c.window_size = 100;
  c.alpha = Rational{2, 1};
  return c;
}

void SelectionWindow::push(const LanguageId& lang) {
  if (capacity_ == 0) return;
  recent_.push_back(lang);
  if (recent_.size() > capacity_) recent_.pop_front();
}

std::size_t SelectionWindow::count(const LanguageId& lang, std::size_t last_n) const {
  const std::size_t n = std::min(last_n, recent_.size());
  return static_cast<std::size_t>(std::count(recent_.end() - static_cast<std::ptrdiff_t>(n), recent_.end(), lang));
}

bool exceeds_quota(const SelectionWindow& window, const LanguageId& lang, const Rational& alpha,
                   std::size_t num_languages) {
  const std::size_t w = window.capacity();
  if (w == 0 || num_languages == 0) return false;
  using i128 = __int128;
  const i128 after = static_cast<i128>(window.count(lang, w - 1) + 1);
  // after > alpha * W / |L|
  return after * static_cast<i128>(num_languages) * alpha.den > static_cast<i128>(alpha.num) * static_cast<i128>(w);
}

LanguageChoice rank_languages(const CRTable& table, const SelectionWindow& window, const Rational& alpha) {
  std::vector<std::size_t> idx(table.languages.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (table.cr_less(a, b)) return true;
    if (table.cr_less(b, a)) return false;
    return table.languages[a] < table.languages[b];
  });
  LanguageChoice choice;
  std::vector<std::size_t> excluded;
  for (std::size_t i : idx) {
    if (exceeds_quota(window, table.languages[i], alpha, table.languages.size())) {
      excluded.push_back(i);
    } else {
      choice.order.push_back(i);
    }
  }
  choice.num_allowed = choice.order.size();
  choice.order.insert(choice.order.end(), excluded.begin(), excluded.end());
  return choice;
}

LanguageId select_language(const CRTable& table, const SelectionWindow& window, const ParityConfig& config) {
  if (table.languages.empty()) throw InvariantError("CR table is empty");
  const LanguageChoice choice = rank_languages(table, window, config.alpha);
  return table.languages[choice.order.front()];
}

CRTable compute_cr(const ParallelDevCorpus& dev, const TokenizerModel& model, NormUnit unit) {
  CRTable t;
  t.unit = unit;
  for (std::size_t i = 0; i < dev.languages.size(); ++i) {
    std::uint64_t units = 0;
    std::uint64_t tokens = 0;
    for (const Bytes& line : dev.lines[i]) {
      units += unit_length(line, unit).value;
      tokens += model.token_count(line);
    }
    if (units == 0) throw DataError("language '" + dev.languages[i].code() + "' has zero unit total");
    t.languages.push_back(dev.languages[i]);
    t.unit_totals.push_back(units);
    t.token_totals.push_back(tokens);
  }
  return t;
}

CRTable compute_cr(const LabeledCorpus& corpus, const TokenizerModel& model, NormUnit unit) {
  CRTable t;
  t.unit = unit;
  for (const auto& [lang, shard] : corpus.per_language) {
    const std::uint64_t units = shard.totals[unit];
    if (units == 0) throw DataError("language '" + lang.code() + "' has zero unit total");
    std::uint64_t tokens = 0;
    for (const auto& [word, n] : shard.words.counts) tokens += model.encode_pretoken(word).size() * n;
    t.languages.push_back(lang);
    t.unit_totals.push_back(units);
    t.token_totals.push_back(tokens);
  }
  return t;
}

namespace {

TrainResult run_parity(TrainerState& state, const ParityConfig& config, const StepObserver& observer) {
  TrainLog log;
  SelectionWindow window(config.window_size);
  for (std::size_t step = 1; step <= config.total_merges; ++step) {
    TrainLogEntry e;
    e.step = step;
    std::optional<PairChoice> choice;

    if (step <= config.hybrid_global_merges) {
      choice = state.select_global();
    } else {
      e.parity_step = true;
      const CRTable table = state.cr_table();
      for (std::size_t i = 0; i < table.languages.size(); ++i) e.cr_snapshot[table.languages[i]] = table.cr(i);
      const LanguageChoice ranking = rank_languages(table, window, config.alpha);
      for (std::size_t pos = 0; pos < ranking.order.size(); ++pos) {
        const LanguageId& lang = table.languages[ranking.order[pos]];
        choice = state.select_in_language(*state.language_index(lang));
        if (choice) {
          e.lang = lang;
          e.fallback = pos >= ranking.num_allowed;
          break;
        }
        e.skipped.push_back(lang);
      }
    }

    if (!choice) {
      log.stop = StopReason::kNoEligiblePair;
      break;
    }
    const auto applied = state.apply_merge(choice->left, choice->right);
    if (!applied.applied) throw InvariantError("selected pair is absent from the corpus");
    if (e.lang) window.push(*e.lang);
    e.left = state.model().token_bytes(choice->left);
    e.right = state.model().token_bytes(choice->right);
    e.count = choice->count;
    e.replacements = applied.replacements;
    log.entries.push_back(std::move(e));
    if (observer) observer(state, log.entries.back());
  }
  return {state.model(), std::move(log)};
}

}  // namespace

TrainResult train_parity(const LabeledCorpus& train, const ParallelDevCorpus& dev, const ParityConfig& config,
                         const StepObserver& observer) {
  config.validate();
  if (config.dev_source != DevSource::kParallelDev) {
    throw UsageError("train_parity needs dev_source = parallel dev; use train_no_dev");
  }
  TrainerState state(train);
  state.attach_dev(dev, config.unit);
  return run_parity(state, config, observer);
}

TrainResult train_no_dev(const LabeledCorpus& train, const ParityConfig& config, const StepObserver& observer) {
  config.validate();
  if (config.dev_source != DevSource::kTrainingAsDev) {
    throw UsageError("train_no_dev needs dev_source = training corpus");
  }
  TrainerState state(train);
  state.attach_training_as_dev();
  return run_parity(state, config, observer);
}

}  // namespace pbpe
