#include "euph/tokenizer.hpp"

#include <cctype>

#include "euph/error.hpp"
#include "euph/hash.hpp"

namespace euph {

HashingTokenizer::HashingTokenizer(std::size_t buckets) : buckets_(buckets) {
  if (buckets_ == 0) throw UsageError("HashingTokenizer needs at least one bucket");
}

std::vector<std::string> HashingTokenizer::pieces(std::string_view text) const {
  std::vector<std::string> out;
  std::string cur;
  const auto flush = [&] {
    if (!cur.empty()) out.push_back(std::exchange(cur, {}));
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::vector<TokenId> HashingTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& p : pieces(text)) {
    ids.push_back(kFirstRegular + static_cast<TokenId>(fnv1a64(p) % buckets_));
  }
  return ids;
}

}  // namespace euph
