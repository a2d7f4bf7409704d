#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "euph/corpus.hpp"
#include "euph/tokenizer.hpp"

namespace euph {

enum class PromptVariant { kVanilla, kDescribed };

std::string_view to_string(PromptVariant v);

inline constexpr std::string_view kTermMarker = "Term:";
inline constexpr std::string_view kDescriptionMarker = "Description:";
inline constexpr std::string_view kSentenceMarker = "Sentence:";

struct PromptTemplate {
  // Placed between the Term, Description and Sentence segments.
  std::string separator = " ";
};

struct Prompt {
  std::string text;
  PromptVariant variant = PromptVariant::kVanilla;
  std::string term;
  std::string description;  // empty for vanilla
  std::string sentence;
  std::string separator = " ";
  std::string example_id;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

// Described: "Term: {T}{sep}Description: {D}{sep}Sentence: {S}".
// Vanilla: the sentence itself. The example must already be preprocessed.
// In strict mode an empty description for the described variant is an error.
Prompt build_prompt(PromptVariant variant, const PetEntry& entry, const Example& example,
                    LexiconMode mode = LexiconMode::kStrict, const PromptTemplate& tmpl = {});

struct EncodedPrompt {
  std::vector<TokenId> ids;  // [cls] ... [sep]
  std::size_t sentence_tokens = 0;
  std::size_t sentence_tokens_dropped = 0;

  bool truncated() const { return sentence_tokens_dropped > 0; }
};

// Tokenizes segment by segment so that, when the budget is exceeded, only the
// tail of the sentence is dropped; Term and Description are never cut. Throws
// DataError when even an empty sentence would not fit.
EncodedPrompt encode_prompt(const Prompt& prompt, const Tokenizer& tokenizer, std::size_t max_tokens);

}  // namespace euph
