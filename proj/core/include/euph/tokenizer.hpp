#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace euph {

using TokenId = std::int32_t;

// Text-to-id contract of a language-model backend. tokenize() never emits
// special tokens; callers add cls/sep themselves.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<TokenId> tokenize(std::string_view text) const = 0;
  virtual TokenId pad_id() const = 0;
  virtual TokenId cls_id() const = 0;
  virtual TokenId sep_id() const = 0;
  virtual std::size_t vocab_size() const = 0;
};

// Lower-cases, splits on whitespace and punctuation (each punctuation byte is
// its own token) and hashes pieces into a fixed number of buckets. Splitting
// is compositional: tokenize(a + " " + b) == tokenize(a) ++ tokenize(b).
class HashingTokenizer final : public Tokenizer {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kCls = 1;
  static constexpr TokenId kSep = 2;
  static constexpr TokenId kFirstRegular = 3;

  explicit HashingTokenizer(std::size_t buckets = 4096);

  std::vector<TokenId> tokenize(std::string_view text) const override;
  std::vector<std::string> pieces(std::string_view text) const;

  TokenId pad_id() const override { return kPad; }
  TokenId cls_id() const override { return kCls; }
  TokenId sep_id() const override { return kSep; }
  std::size_t vocab_size() const override { return buckets_ + kFirstRegular; }
  std::size_t buckets() const { return buckets_; }

 private:
  std::size_t buckets_;
};

}  // namespace euph
