#include "pbpe/trainer.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "pbpe/error.hpp"

namespace pbpe {

namespace {

TokenId key_left(std::uint64_t key) { return static_cast<TokenId>(key >> 32); }
TokenId key_right(std::uint64_t key) { return static_cast<TokenId>(key & 0xffffffffu); }

}  // namespace

// --- PairCounts -------------------------------------------------------------

PairCounts::PairCounts(const TokenizerModel* vocab) : vocab_(vocab), order_(Order{vocab}) {}

bool PairCounts::Order::operator()(const Entry& a, const Entry& b) const {
  if (a.count != b.count) return a.count > b.count;
  if (a.left != b.left) {
    if (int c = vocab->token_bytes(a.left).compare(vocab->token_bytes(b.left)); c != 0) return c < 0;
  }
  if (a.right != b.right) {
    if (int c = vocab->token_bytes(a.right).compare(vocab->token_bytes(b.right)); c != 0) return c < 0;
  }
  return std::pair(a.left, a.right) < std::pair(b.left, b.right);
}

void PairCounts::add(std::uint64_t key, std::int64_t delta) {
  if (delta == 0) return;
  auto it = counts_.find(key);
  const std::uint64_t old = it == counts_.end() ? 0 : it->second;
  const std::int64_t updated = static_cast<std::int64_t>(old) + delta;
  if (updated < 0) throw InvariantError("pair count became negative");
  const TokenId l = key_left(key);
  const TokenId r = key_right(key);
  if (old > 0) order_.erase(Entry{old, l, r});
  if (updated > 0) {
    order_.insert(Entry{static_cast<std::uint64_t>(updated), l, r});
    if (it == counts_.end()) {
      counts_.emplace(key, static_cast<std::uint64_t>(updated));
    } else {
      it->second = static_cast<std::uint64_t>(updated);
    }
  } else if (it != counts_.end()) {
    counts_.erase(it);
  }
}

std::uint64_t PairCounts::get(std::uint64_t key) const {
  auto it = counts_.find(key);
  return it == counts_.end() ? 0 : it->second;
}

std::optional<PairChoice> PairCounts::best() const {
  for (const Entry& e : order_) {
    if (e.count < kMinPairCount) break;
    // A pair can resurface after a later merge reproduces one of its operands'
    // bytes; the encoder never re-applies an earlier merge, so skip it here.
    if (vocab_->merge_rank(e.left, e.right)) continue;
    return PairChoice{e.left, e.right, e.count};
  }
  return std::nullopt;
}

// --- CRTable ----------------------------------------------------------------

std::optional<std::size_t> CRTable::index_of(const LanguageId& lang) const {
  auto it = std::find(languages.begin(), languages.end(), lang);
  if (it == languages.end()) return std::nullopt;
  return static_cast<std::size_t>(it - languages.begin());
}

bool CRTable::cr_less(std::size_t a, std::size_t b) const {
  using u128 = unsigned __int128;
  return static_cast<u128>(unit_totals[a]) * token_totals[b] <
         static_cast<u128>(unit_totals[b]) * token_totals[a];
}

// --- WordTable --------------------------------------------------------------

WordTable::WordTable(std::size_t num_languages, const TokenizerModel* vocab, bool track_pairs)
    : num_languages_(num_languages),
      track_pairs_(track_pairs),
      token_totals_(num_languages, 0),
      global_pairs_(vocab) {
  if (track_pairs_) {
    lang_pairs_.reserve(num_languages);
    for (std::size_t i = 0; i < num_languages; ++i) lang_pairs_.emplace_back(vocab);
  }
}

void WordTable::index_pairs(std::uint32_t word_id, const std::vector<TokenId>& tokens) {
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    where_[pair_key(tokens[i], tokens[i + 1])].push_back(word_id);
  }
}

void WordTable::add_word(BytesView bytes, std::uint32_t lang, std::uint64_t count) {
  if (count == 0) return;
  if (lang >= num_languages_) throw InvariantError("language index out of range");
  auto [it, inserted] = word_ids_.emplace(Bytes(bytes), static_cast<std::uint32_t>(words_.size()));
  if (inserted) {
    TrainingWord w;
    w.bytes = Bytes(bytes);
    w.tokens.reserve(bytes.size());
    for (char c : bytes) w.tokens.push_back(static_cast<unsigned char>(c));
    words_.push_back(std::move(w));
    index_pairs(it->second, words_.back().tokens);
  }
  TrainingWord& w = words_[it->second];
  auto lc = std::find_if(w.counts.begin(), w.counts.end(), [&](const LangCount& c) { return c.lang == lang; });
  if (lc == w.counts.end()) {
    w.counts.push_back({lang, count});
  } else {
    lc->count += count;
  }
  token_totals_[lang] += w.tokens.size() * count;
  if (track_pairs_) {
    for (std::size_t i = 0; i + 1 < w.tokens.size(); ++i) {
      const std::uint64_t key = pair_key(w.tokens[i], w.tokens[i + 1]);
      lang_pairs_[lang].add(key, static_cast<std::int64_t>(count));
      global_pairs_.add(key, static_cast<std::int64_t>(count));
    }
  }
}

std::vector<std::uint64_t> WordTable::apply_merge(TokenId left, TokenId right, TokenId result) {
  std::vector<std::uint64_t> replaced(num_languages_, 0);
  auto found = where_.find(pair_key(left, right));
  if (found == where_.end()) return replaced;
  std::vector<std::uint32_t> candidates = std::move(found->second);
  where_.erase(found);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  // Pair deltas are collected first so each touched pair is re-ranked once.
  std::vector<std::unordered_map<std::uint64_t, std::int64_t>> delta(track_pairs_ ? num_languages_ : 0);
  auto accumulate = [&](const TrainingWord& w, std::int64_t sign) {
    for (std::size_t i = 0; i + 1 < w.tokens.size(); ++i) {
      const std::uint64_t key = pair_key(w.tokens[i], w.tokens[i + 1]);
      for (const LangCount& lc : w.counts) delta[lc.lang][key] += sign * static_cast<std::int64_t>(lc.count);
    }
  };

  std::vector<TokenId> merged;
  for (std::uint32_t id : candidates) {
    TrainingWord& w = words_[id];
    merged.clear();
    std::uint64_t r = 0;
    for (std::size_t i = 0; i < w.tokens.size();) {
      if (i + 1 < w.tokens.size() && w.tokens[i] == left && w.tokens[i + 1] == right) {
        merged.push_back(result);
        i += 2;
        ++r;
      } else {
        merged.push_back(w.tokens[i]);
        ++i;
      }
    }
    if (r == 0) continue;
    if (track_pairs_) accumulate(w, -1);
    w.tokens.swap(merged);
    if (track_pairs_) accumulate(w, +1);
    for (const LangCount& lc : w.counts) {
      token_totals_[lc.lang] -= r * lc.count;
      replaced[lc.lang] += r * lc.count;
    }
    for (std::size_t i = 0; i + 1 < w.tokens.size(); ++i) {
      if (w.tokens[i] == result || w.tokens[i + 1] == result) {
        where_[pair_key(w.tokens[i], w.tokens[i + 1])].push_back(id);
      }
    }
  }

  if (track_pairs_) {
    std::unordered_map<std::uint64_t, std::int64_t> global;
    for (std::size_t lang = 0; lang < num_languages_; ++lang) {
      for (const auto& [key, d] : delta[lang]) {
        lang_pairs_[lang].add(key, d);
        global[key] += d;
      }
    }
    for (const auto& [key, d] : global) global_pairs_.add(key, d);
  }
  return replaced;
}

// --- TrainerState -----------------------------------------------------------

TrainerState::TrainerState(const LabeledCorpus& corpus)
    : languages_(corpus.languages()), model_(std::make_unique<TokenizerModel>()) {
  if (corpus.empty()) throw DataError("cannot train on an empty corpus");
  train_ = std::make_unique<WordTable>(languages_.size(), model_.get(), true);
  for (std::uint32_t i = 0; i < languages_.size(); ++i) {
    for (const auto& [word, count] : corpus.shard(languages_[i]).words.counts) {
      train_->add_word(word, i, count);
    }
  }
}

std::optional<std::size_t> TrainerState::language_index(const LanguageId& lang) const {
  auto it = std::find(languages_.begin(), languages_.end(), lang);
  if (it == languages_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - languages_.begin());
}

void TrainerState::attach_dev(const ParallelDevCorpus& dev, NormUnit unit) {
  dev.validate();
  CrSource src{unit, std::vector<std::uint64_t>(languages_.size(), 0),
               std::vector<bool>(languages_.size(), false),
               std::make_unique<WordTable>(languages_.size(), model_.get(), false)};
  for (std::size_t d = 0; d < dev.languages.size(); ++d) {
    const auto idx = language_index(dev.languages[d]);
    if (!idx) {
      throw DataError("dev language '" + dev.languages[d].code() + "' has no training data");
    }
    src.present[*idx] = true;
    WordMultiset words;
    for (const Bytes& line : dev.lines[d]) {
      src.unit_totals[*idx] += unit_length(line, unit).value;
      for (BytesView p : pretokenize(line)) words.add(p);
    }
    if (src.unit_totals[*idx] == 0) {
      throw DataError("dev language '" + dev.languages[d].code() + "' has zero length in unit " +
                      std::string(to_string(unit)));
    }
    for (const auto& [w, n] : words.counts) src.dev->add_word(w, static_cast<std::uint32_t>(*idx), n);
  }
  for (const Merge& m : model_->merges()) src.dev->apply_merge(m.left, m.right, m.result);
  cr_ = std::move(src);
}

void TrainerState::attach_training_as_dev() {
  CrSource src{NormUnit::kBytes, std::vector<std::uint64_t>(languages_.size(), 0),
               std::vector<bool>(languages_.size(), true), nullptr};
  for (std::size_t i = 0; i < languages_.size(); ++i) {
    // Every byte of the raw text lives in exactly one pre-token.
    std::uint64_t bytes = 0;
    for (const TrainingWord& w : train_->words()) {
      for (const LangCount& lc : w.counts) {
        if (lc.lang == i) bytes += w.bytes.size() * lc.count;
      }
    }
    if (bytes == 0) throw DataError("training shard '" + languages_[i].code() + "' is empty");
    src.unit_totals[i] = bytes;
  }
  cr_ = std::move(src);
}

TrainerState::ApplyResult TrainerState::apply_merge(TokenId left, TokenId right) {
  ApplyResult res;
  if (train_->global_pairs().get(pair_key(left, right)) == 0 || model_->merge_rank(left, right)) {
    res.per_language.assign(languages_.size(), 0);
    return res;
  }
  const std::size_t rank = model_->add_merge(left, right);
  const Merge& m = model_->merges()[rank];
  res.applied = true;
  res.per_language = train_->apply_merge(m.left, m.right, m.result);
  for (std::uint64_t r : res.per_language) res.replacements += r;
  if (cr_ && cr_->dev) cr_->dev->apply_merge(m.left, m.right, m.result);
  return res;
}

CRTable TrainerState::cr_table() const {
  if (!cr_) throw InvariantError("no CR corpus attached");
  CRTable t;
  t.unit = cr_->unit;
  const auto& tokens = cr_->dev ? cr_->dev->token_totals() : train_->token_totals();
  for (std::size_t i = 0; i < languages_.size(); ++i) {
    if (!cr_->present[i]) continue;
    t.languages.push_back(languages_[i]);
    t.unit_totals.push_back(cr_->unit_totals[i]);
    t.token_totals.push_back(tokens[i]);
  }
  return t;
}

std::map<std::pair<Bytes, Bytes>, std::uint64_t> TrainerState::pair_counts(
    std::optional<std::size_t> lang) const {
  const PairCounts& pc = lang ? train_->language_pairs(*lang) : train_->global_pairs();
  std::map<std::pair<Bytes, Bytes>, std::uint64_t> out;
  for (const auto& [key, n] : pc.all()) {
    out.emplace(std::pair(model_->token_bytes(key_left(key)), model_->token_bytes(key_right(key))), n);
  }
  return out;
}

// --- logs and classical training --------------------------------------------

std::string train_log_to_jsonl(const TrainLog& log) {
  std::string out;
  for (const TrainLogEntry& e : log.entries) {
    nlohmann::ordered_json j;
    j["step"] = e.step;
    j["left"] = escape_bytes(e.left);
    j["right"] = escape_bytes(e.right);
    j["count"] = e.count;
    j["replacements"] = e.replacements;
    j["phase"] = e.parity_step ? "parity" : "global";
    if (e.lang) j["lang"] = e.lang->code();
    if (!e.cr_snapshot.empty()) {
      nlohmann::ordered_json snap = nlohmann::ordered_json::object();
      for (const auto& [lang, cr] : e.cr_snapshot) snap[lang.code()] = cr;
      j["cr_snapshot"] = std::move(snap);
    }
    if (e.fallback) j["fallback"] = true;
    if (!e.skipped.empty()) {
      auto& s = j["skipped"] = nlohmann::ordered_json::array();
      for (const auto& l : e.skipped) s.push_back(l.code());
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

TrainResult train_classical(const LabeledCorpus& corpus, std::size_t merges, const StepObserver& observer) {
  TrainerState state(corpus);
  TrainLog log;
  for (std::size_t step = 1; step <= merges; ++step) {
    const auto choice = state.select_global();
    if (!choice) {
      log.stop = StopReason::kNoEligiblePair;
      break;
    }
    const auto applied = state.apply_merge(choice->left, choice->right);
    if (!applied.applied) throw InvariantError("selected pair is absent from the corpus");
    TrainLogEntry e;
    e.step = step;
    e.left = state.model().token_bytes(choice->left);
    e.right = state.model().token_bytes(choice->right);
    e.count = choice->count;
    e.replacements = applied.replacements;
    log.entries.push_back(std::move(e));
    if (observer) observer(state, log.entries.back());
  }
  return {state.model(), std::move(log)};
}

}  // namespace pbpe
