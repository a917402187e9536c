#include "pbpe/tokenizer.hpp"

#include <fstream>
#include <functional>
#include <queue>
#include <sstream>

#include "pbpe/corpus.hpp"
#include "pbpe/error.hpp"

namespace pbpe {

TokenizerModel::TokenizerModel() {
  id_bytes_.reserve(kNumByteTokens);
  canonical_.reserve(kNumByteTokens);
  for (TokenId b = 0; b < kNumByteTokens; ++b) {
    id_bytes_.emplace_back(1, static_cast<char>(b));
    canonical_.push_back(b);
    bytes_to_id_.emplace(id_bytes_.back(), b);
  }
}

TokenizerModel TokenizerModel::from_merges(std::span<const std::pair<Bytes, Bytes>> merges) {
  TokenizerModel model;
  for (std::size_t k = 0; k < merges.size(); ++k) {
    const auto& [left, right] = merges[k];
    auto l = model.find_token(left);
    auto r = model.find_token(right);
    if (!l || !r) {
      throw DataError("merge " + std::to_string(k + 1) + " (" + escape_bytes(left) + " " +
                      escape_bytes(right) + ") uses token '" + escape_bytes(!l ? left : right) +
                      "' that is neither a byte nor an earlier merge result");
    }
    if (model.merge_rank(*l, *r)) {
      throw DataError("merge " + std::to_string(k + 1) + " (" + escape_bytes(left) + " " +
                      escape_bytes(right) + ") repeats an earlier pair");
    }
    model.add_merge(*l, *r);
  }
  return model;
}

std::size_t TokenizerModel::add_merge(TokenId left, TokenId right) {
  left = canonical_.at(left);
  right = canonical_.at(right);
  const std::uint64_t key = pair_key(left, right);
  if (rank_.contains(key)) throw InvariantError("duplicate merge pair");
  const auto rank = static_cast<std::uint32_t>(merges_.size());
  const auto id = static_cast<TokenId>(id_bytes_.size());
  Bytes result = id_bytes_[left] + id_bytes_[right];
  auto [it, inserted] = bytes_to_id_.emplace(result, id);
  id_bytes_.push_back(std::move(result));
  canonical_.push_back(it->second);
  merges_.push_back({left, right, it->second});
  rank_.emplace(key, rank);
  return rank;
}

std::optional<TokenId> TokenizerModel::find_token(BytesView bytes) const {
  auto it = bytes_to_id_.find(Bytes(bytes));
  if (it == bytes_to_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> TokenizerModel::merge_rank(TokenId left, TokenId right) const {
  if (left >= canonical_.size() || right >= canonical_.size()) return std::nullopt;
  auto it = rank_.find(pair_key(canonical_[left], canonical_[right]));
  if (it == rank_.end()) return std::nullopt;
  return it->second;
}

TokenizerModel TokenizerModel::prefix(std::size_t k) const {
  TokenizerModel out;
  for (std::size_t i = 0; i < std::min(k, merges_.size()); ++i) {
    out.add_merge(merges_[i].left, merges_[i].right);
  }
  return out;
}

std::vector<TokenId> TokenizerModel::encode_pretoken(BytesView pretoken) const {
  const std::size_t n = pretoken.size();
  std::vector<TokenId> tok(n);
  for (std::size_t i = 0; i < n; ++i) tok[i] = static_cast<unsigned char>(pretoken[i]);
  if (n < 2 || merges_.empty()) return tok;

  // Doubly linked list over positions; a merged pair lives at its left slot.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> next(n), prev(n);
  std::vector<bool> alive(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    next[i] = i + 1 < n ? i + 1 : kNone;
    prev[i] = i > 0 ? i - 1 : kNone;
  }

  using Entry = std::pair<std::uint32_t, std::size_t>;  // (rank, position)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  auto push_pair = [&](std::size_t pos) {
    if (pos == kNone || next[pos] == kNone) return;
    auto it = rank_.find(pair_key(tok[pos], tok[next[pos]]));
    if (it != rank_.end()) heap.emplace(it->second, pos);
  };
  for (std::size_t i = 0; i + 1 < n; ++i) push_pair(i);

  // Popping by (rank, position) replays the merge list in order, each merge
  // applied left to right. Pairs whose rank is below the merge currently being
  // replayed can only arise from duplicate merge results; sequential replay
  // never revisits them, so neither do we.
  std::uint32_t floor_rank = 0;
  while (!heap.empty()) {
    const auto [rank, pos] = heap.top();
    heap.pop();
    if (rank < floor_rank || !alive[pos] || next[pos] == kNone) continue;
    const std::size_t right = next[pos];
    const Merge& m = merges_[rank];
    if (tok[pos] != m.left || tok[right] != m.right) continue;
    floor_rank = rank;
    tok[pos] = m.result;
    alive[right] = false;
    next[pos] = next[right];
    if (next[pos] != kNone) prev[next[pos]] = pos;
    push_pair(prev[pos]);
    push_pair(pos);
  }

  std::vector<TokenId> out;
  for (std::size_t i = 0; i != kNone; i = next[i]) out.push_back(tok[i]);
  return out;
}

std::vector<TokenId> TokenizerModel::encode_ids(BytesView text) const {
  std::vector<TokenId> out;
  for (BytesView p : pretokenize(text)) {
    auto ids = encode_pretoken(p);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

std::vector<Bytes> TokenizerModel::encode(BytesView text) const {
  std::vector<Bytes> out;
  for (TokenId id : encode_ids(text)) out.push_back(id_bytes_[id]);
  return out;
}

std::size_t TokenizerModel::token_count(BytesView text) const {
  std::size_t count = 0;
  for (BytesView p : pretokenize(text)) count += encode_pretoken(p).size();
  return count;
}

Bytes TokenizerModel::decode(std::span<const Bytes> tokens) const {
  Bytes out;
  for (const Bytes& t : tokens) {
    if (!bytes_to_id_.contains(t)) throw DataError("token not in vocabulary: '" + escape_bytes(t) + "'");
    out += t;
  }
  return out;
}

Bytes TokenizerModel::decode_ids(std::span<const TokenId> ids) const {
  Bytes out;
  for (TokenId id : ids) {
    if (id >= id_bytes_.size()) throw DataError("unknown token id " + std::to_string(id));
    out += id_bytes_[id];
  }
  return out;
}

std::vector<std::pair<Bytes, Bytes>> TokenizerModel::merge_pairs() const {
  std::vector<std::pair<Bytes, Bytes>> out;
  out.reserve(merges_.size());
  for (const Merge& m : merges_) out.emplace_back(id_bytes_[m.left], id_bytes_[m.right]);
  return out;
}

std::string serialize_model(const TokenizerModel& model) {
  std::string out;
  out += kModelHeader;
  out += "\nmerges:\n";
  for (const Merge& m : model.merges()) {
    out += escape_bytes(model.token_bytes(m.left));
    out += '\t';
    out += escape_bytes(model.token_bytes(m.right));
    out += '\n';
  }
  return out;
}

TokenizerModel parse_model(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.empty() || lines[0] != kModelHeader) {
    throw DataError("unsupported model format: expected header '" + std::string(kModelHeader) + "'" +
                    (lines.empty() ? std::string() : ", found '" + std::string(lines[0]) + "'"));
  }
  if (lines.size() < 2 || lines[1] != "merges:") throw DataError("model file lacks 'merges:' section");

  std::vector<std::pair<Bytes, Bytes>> merges;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    const std::size_t tab = line.find('\t');
    std::optional<Bytes> left, right;
    if (tab != std::string_view::npos && line.find('\t', tab + 1) == std::string_view::npos) {
      left = unescape_bytes(line.substr(0, tab));
      right = unescape_bytes(line.substr(tab + 1));
    }
    if (!left || !right || left->empty() || right->empty()) {
      throw DataError("malformed merge on model line " + std::to_string(i + 1) + ": '" +
                      std::string(line) + "'");
    }
    merges.emplace_back(std::move(*left), std::move(*right));
  }
  return TokenizerModel::from_merges(merges);
}

void save_model(const TokenizerModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << serialize_model(model);
  if (!out) throw DataError("failed writing model " + path.string());
}

TokenizerModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace pbpe
