#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pbpe/bytes.hpp"

namespace pbpe {

// Token ids follow model order: 0..255 are the singleton bytes and 256 + k is
// the result of merge k. When two merges produce the same bytes the token is
// identified by the first id that produced them.
using TokenId = std::uint32_t;

inline constexpr TokenId kNumByteTokens = 256;

inline std::uint64_t pair_key(TokenId left, TokenId right) {
  return (static_cast<std::uint64_t>(left) << 32) | right;
}

struct Merge {
  TokenId left = 0;
  TokenId right = 0;
  TokenId result = 0;
};

// Vocabulary plus ordered merge list. Immutable once built; encode/decode are
// safe to call concurrently.
class TokenizerModel {
 public:
  // Identity (byte-level) tokenizer.
  TokenizerModel();

  // Throws DataError if an operand is not producible from bytes and earlier
  // merges, or if a (left, right) pair repeats.
  static TokenizerModel from_merges(std::span<const std::pair<Bytes, Bytes>> merges);

  // Appends a merge whose operands are existing tokens. Returns its rank.
  std::size_t add_merge(TokenId left, TokenId right);

  std::span<const Merge> merges() const { return merges_; }
  std::size_t num_merges() const { return merges_.size(); }
  // Number of distinct byte strings in the vocabulary.
  std::size_t vocab_size() const { return bytes_to_id_.size(); }
  // Number of ids (256 + merges); ids of duplicate results are included.
  std::size_t num_ids() const { return id_bytes_.size(); }

  const Bytes& token_bytes(TokenId id) const { return id_bytes_.at(id); }
  // Canonical id for a byte string, if it is in the vocabulary.
  std::optional<TokenId> find_token(BytesView bytes) const;
  std::optional<std::size_t> merge_rank(TokenId left, TokenId right) const;

  // Copy of this model truncated to its first `k` merges.
  TokenizerModel prefix(std::size_t k) const;

  std::vector<TokenId> encode_ids(BytesView text) const;
  std::vector<Bytes> encode(BytesView text) const;
  std::size_t token_count(BytesView text) const;

  // Encoding of a single pre-token (no whitespace splitting).
  std::vector<TokenId> encode_pretoken(BytesView pretoken) const;

  // Throws DataError naming the offending token or id.
  Bytes decode(std::span<const Bytes> tokens) const;
  Bytes decode_ids(std::span<const TokenId> ids) const;

  std::vector<std::pair<Bytes, Bytes>> merge_pairs() const;

 private:
  std::vector<Bytes> id_bytes_;
  std::vector<TokenId> canonical_;  // id -> canonical id
  std::unordered_map<Bytes, TokenId> bytes_to_id_;
  std::vector<Merge> merges_;
  std::unordered_map<std::uint64_t, std::uint32_t> rank_;
};

inline constexpr std::string_view kModelHeader = "parity-bpe v1";

// Text format: header line, "merges:" line, then one "<left>\t<right>" line
// per merge with both sides escaped by escape_bytes.
std::string serialize_model(const TokenizerModel& model);
TokenizerModel parse_model(std::string_view text);

void save_model(const TokenizerModel& model, const std::filesystem::path& path);
TokenizerModel load_model(const std::filesystem::path& path);

}  // namespace pbpe
