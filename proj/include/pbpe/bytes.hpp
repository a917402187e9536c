#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace pbpe {

// Byte strings are carried in std::string; no encoding is assumed.
using Bytes = std::string;
using BytesView = std::string_view;

inline bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Text form of a byte span: bytes 0x21..0x7E are literal except '\\', which
// becomes "\\\\"; everything else (including space) becomes "\xHH". The
// result never contains whitespace, so escaped tokens can be joined with
// spaces or tabs.
std::string escape_bytes(BytesView bytes);

// Inverse of escape_bytes. Returns nullopt on a malformed escape.
std::optional<Bytes> unescape_bytes(std::string_view text);

// Number of Unicode scalar values, or nullopt if `bytes` is not valid UTF-8
// (overlongs, surrogates and values above U+10FFFF are rejected).
std::optional<std::size_t> utf8_scalar_count(BytesView bytes);

// Lowercase hex SHA-256 digest.
std::string sha256_hex(BytesView data);

}  // namespace pbpe
