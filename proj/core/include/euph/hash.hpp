#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace euph {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(std::span<const std::uint8_t> bytes);
Sha256Digest sha256(std::string_view text);
std::string to_hex(std::span<const std::uint8_t> bytes);

// Incremental hasher over length-prefixed fields, so ("ab","c") and
// ("a","bc") never collide.
class FieldHasher {
 public:
  FieldHasher();
  ~FieldHasher();
  FieldHasher(const FieldHasher&) = delete;
  FieldHasher& operator=(const FieldHasher&) = delete;

  FieldHasher& add(std::string_view field);
  FieldHasher& add(std::int64_t value);
  FieldHasher& add(std::span<const std::uint8_t> bytes);

  Sha256Digest digest();
  std::string hex_digest();

 private:
  void update(const void* data, std::size_t size);
  void* ctx_;
};

// Non-cryptographic 64-bit hash, stable across platforms.
std::uint64_t fnv1a64(std::string_view text) noexcept;

}  // namespace euph
