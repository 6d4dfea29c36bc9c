#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace hbvote {

/// A 32-byte SHA-256 digest. Serialized as 64 lowercase hex characters.
struct HashDigest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;

  /// Parses exactly 64 hex characters; uppercase is rejected so the text
  /// form stays canonical.
  static std::optional<HashDigest> from_hex(std::string_view text);

  auto operator<=>(const HashDigest&) const = default;
};

HashDigest sha256(std::string_view data);

}  // namespace hbvote

template <>
struct std::hash<hbvote::HashDigest> {
  std::size_t operator()(const hbvote::HashDigest& d) const noexcept {
    std::size_t out;
    std::memcpy(&out, d.bytes.data(), sizeof(out));
    return out;
  }
};
