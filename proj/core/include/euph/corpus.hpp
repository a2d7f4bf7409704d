#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace euph {

struct TermSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const { return end - begin; }
  friend bool operator==(const TermSpan&, const TermSpan&) = default;
};

// One instance of the task. `sentence` starts out equal to `context` and is
// narrowed by preprocess().
struct Example {
  std::string id;
  std::string context;
  std::string sentence;
  std::string term_surface;
  TermSpan term_span;
  std::optional<int> label;  // 1 = euphemistic, 0 = literal
  std::string pet_id;

  friend bool operator==(const Example&, const Example&) = default;
};

struct PetEntry {
  std::string pet_id;
  std::string term;
  std::string description;
  std::vector<std::string> variants;

  friend bool operator==(const PetEntry&, const PetEntry&) = default;
};

struct Fold {
  int index = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;

  friend bool operator==(const Fold&, const Fold&) = default;
};

enum class SplitKind { kLabeled, kUnlabeled };
enum class LexiconMode { kStrict, kLenient };

// Identifier of the only ingestion format currently understood.
inline constexpr std::string_view kExamplesJsonlV1 = "jsonl-v1";

// Parses the examples file (JSON Lines; fields id, context, term, pet_id and,
// for labeled splits, label). Errors name the 1-based line number.
std::vector<Example> parse_examples(std::string_view jsonl, SplitKind split);
std::vector<Example> load_examples(const std::filesystem::path& path, SplitKind split,
                                   std::string_view schema = kExamplesJsonlV1);
std::string examples_to_jsonl(const std::vector<Example>& examples);

// --- preprocessing -------------------------------------------------------

// Drops maximal runs of two or more whitespace-separated "@" tokens and
// collapses whitespace to single spaces.
std::string clean_text(std::string_view text);

// Splits cleaned text after tokens ending in '.', '!' or '?'.
std::vector<std::string> split_sentences(std::string_view cleaned);

// Locates `term` in `text`, preferring whole-word exact matches, then
// whole-word case-insensitive, then any exact or case-insensitive substring.
std::optional<TermSpan> find_term(std::string_view text, std::string_view term);

// Selects the first cleaned sentence of the context containing the term and
// recomputes the span. Idempotent.
Example preprocess(const Example& example);
std::vector<Example> preprocess_all(const std::vector<Example>& examples);

// --- lexicon -------------------------------------------------------------

struct DescriptionLookup {
  std::string description;
  std::optional<std::string> warning;
};

class Lexicon {
 public:
  Lexicon() = default;
  // Throws DataError on duplicate pet_id, or, in strict mode, on an empty
  // description.
  explicit Lexicon(std::vector<PetEntry> entries, LexiconMode mode = LexiconMode::kStrict);

  const std::vector<PetEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  LexiconMode mode() const { return mode_; }

  const PetEntry* find(std::string_view pet_id) const;
  const PetEntry& at(std::string_view pet_id) const;  // NotFound

  DescriptionLookup lookup_description(std::string_view pet_id) const;

  void set_description(std::string_view pet_id, std::string description);

 private:
  std::vector<PetEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  LexiconMode mode_ = LexiconMode::kStrict;
};

std::vector<PetEntry> parse_lexicon(std::string_view json);
Lexicon load_lexicon(const std::filesystem::path& path, LexiconMode mode = LexiconMode::kStrict);
std::string lexicon_to_json(const std::vector<PetEntry>& entries);

struct CoverageReport {
  std::size_t distinct_pets = 0;
  std::vector<std::string> missing;            // pet_ids absent from the lexicon
  std::vector<std::string> empty_description;  // present but blank

  bool complete() const { return missing.empty() && empty_description.empty(); }
};

CoverageReport lexicon_coverage(const std::vector<Example>& examples, const Lexicon& lexicon);

// --- folds ---------------------------------------------------------------

inline constexpr int kDefaultFolds = 5;

// Label-stratified, seed-deterministic partition into n_folds validation
// sets. Fold sizes differ by at most one; so do per-fold positive counts.
std::vector<Fold> make_folds(const std::vector<Example>& labeled, int n_folds, std::uint64_t seed);

std::string folds_to_json(const std::vector<Fold>& folds, std::uint64_t seed);
std::vector<Fold> parse_folds(std::string_view json, std::uint64_t* seed = nullptr);

}  // namespace euph
