#include "euph/hash.hpp"

#include <openssl/evp.h>

#include "euph/error.hpp"

namespace euph {

Sha256Digest sha256(std::span<const std::uint8_t> bytes) {
  Sha256Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw Error(ErrorKind::kBackend, "sha256 failed");
  }
  return out;
}

Sha256Digest sha256(std::string_view text) {
  return sha256(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

FieldHasher::FieldHasher() : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kBackend, "sha256 init failed");
  }
}

FieldHasher::~FieldHasher() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void FieldHasher::update(const void* data, std::size_t size) {
  EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, size);
}

FieldHasher& FieldHasher::add(std::string_view field) {
  add(static_cast<std::int64_t>(field.size()));
  update(field.data(), field.size());
  return *this;
}

FieldHasher& FieldHasher::add(std::int64_t value) {
  std::uint8_t le[8];
  auto u = static_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) le[i] = static_cast<std::uint8_t>(u >> (8 * i));
  update(le, sizeof le);
  return *this;
}

FieldHasher& FieldHasher::add(std::span<const std::uint8_t> bytes) {
  add(static_cast<std::int64_t>(bytes.size()));
  update(bytes.data(), bytes.size());
  return *this;
}

Sha256Digest FieldHasher::digest() {
  Sha256Digest out{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.data(), &len);
  return out;
}

std::string FieldHasher::hex_digest() { return to_hex(digest()); }

std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace euph
