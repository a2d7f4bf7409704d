#include "euph/prompting.hpp"

#include "euph/error.hpp"

namespace euph {

std::string_view to_string(PromptVariant v) {
  return v == PromptVariant::kVanilla ? "vanilla" : "described";
}

Prompt build_prompt(PromptVariant variant, const PetEntry& entry, const Example& example,
                    LexiconMode mode, const PromptTemplate& tmpl) {
  Prompt p;
  p.variant = variant;
  p.term = entry.term;
  p.sentence = example.sentence;
  p.separator = tmpl.separator;
  p.example_id = example.id;
  if (variant == PromptVariant::kVanilla) {
    p.text = example.sentence;
    return p;
  }
  if (entry.description.empty() && mode == LexiconMode::kStrict)
    throw DataError("empty description for pet_id " + entry.pet_id + " (strict mode)");
  p.description = entry.description;
  p.text.reserve(kTermMarker.size() + kDescriptionMarker.size() + kSentenceMarker.size() +
                 p.term.size() + p.description.size() + p.sentence.size() + 3 + 2 * p.separator.size());
  p.text.append(kTermMarker).append(" ").append(p.term);
  p.text.append(p.separator);
  p.text.append(kDescriptionMarker).append(" ").append(p.description);
  p.text.append(p.separator);
  p.text.append(kSentenceMarker).append(" ").append(p.sentence);
  return p;
}

EncodedPrompt encode_prompt(const Prompt& prompt, const Tokenizer& tokenizer, std::size_t max_tokens) {
  std::vector<TokenId> fixed;
  const auto append = [&](std::string_view text) {
    auto ids = tokenizer.tokenize(text);
    fixed.insert(fixed.end(), ids.begin(), ids.end());
  };
  if (prompt.variant == PromptVariant::kDescribed) {
    append(std::string(kTermMarker) + " " + prompt.term);
    append(prompt.separator);
    append(std::string(kDescriptionMarker) + " " + prompt.description);
    append(prompt.separator);
    append(kSentenceMarker);
  }
  auto sentence = tokenizer.tokenize(prompt.sentence);

  const std::size_t overhead = fixed.size() + 2;  // cls + sep
  if (overhead > max_tokens)
    throw DataError("prompt for example " + prompt.example_id + " needs " + std::to_string(overhead) +
                    " tokens before the sentence; budget is " + std::to_string(max_tokens));
  EncodedPrompt out;
  out.sentence_tokens = sentence.size();
  const std::size_t room = max_tokens - overhead;
  if (sentence.size() > room) {
    out.sentence_tokens_dropped = sentence.size() - room;
    sentence.resize(room);
  }
  out.ids.reserve(overhead + sentence.size());
  out.ids.push_back(tokenizer.cls_id());
  out.ids.insert(out.ids.end(), fixed.begin(), fixed.end());
  out.ids.insert(out.ids.end(), sentence.begin(), sentence.end());
  out.ids.push_back(tokenizer.sep_id());
  return out;
}

}  // namespace euph
