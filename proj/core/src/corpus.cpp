#include "euph/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "euph/error.hpp"
#include "euph/io.hpp"
#include "euph/random.hpp"

namespace euph {

using nlohmann::json;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_word(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' ||
         static_cast<unsigned char>(c) >= 0x80;
}
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::vector<std::string_view> split_ws(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) tokens.push_back(text.substr(start, i - start));
  }
  return tokens;
}

bool ends_sentence(std::string_view token) {
  char last = token.back();
  return last == '.' || last == '!' || last == '?';
}

std::string record_id(const json& rec, std::size_t line) {
  auto it = rec.find("id");
  if (it != rec.end() && it->is_string()) return it->get<std::string>();
  return "line " + std::to_string(line);
}

}  // namespace

std::vector<Example> parse_examples(std::string_view jsonl, SplitKind split) {
  std::vector<Example> out;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t nl = jsonl.find('\n', pos);
    if (nl == std::string_view::npos) nl = jsonl.size();
    std::string_view line = jsonl.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (std::all_of(line.begin(), line.end(), is_space)) continue;

    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    const auto where = [&] { return "line " + std::to_string(line_no) + " (" + record_id(rec, line_no) + ")"; };
    if (!rec.is_object()) throw DataError("line " + std::to_string(line_no) + ": record is not an object");
    for (const char* field : {"id", "context", "term", "pet_id"}) {
      auto it = rec.find(field);
      if (it == rec.end() || !it->is_string())
        throw DataError(where() + ": missing or non-string field '" + field + "'");
    }

    Example ex;
    ex.id = rec["id"].get<std::string>();
    ex.context = rec["context"].get<std::string>();
    ex.pet_id = rec["pet_id"].get<std::string>();
    const auto term = rec["term"].get<std::string>();
    if (ex.id.empty()) throw DataError(where() + ": empty id");
    if (term.empty()) throw DataError(where() + ": empty term");
    if (!seen.insert(ex.id).second) throw DataError(where() + ": duplicate id '" + ex.id + "'");

    if (auto it = rec.find("label"); it != rec.end() && !it->is_null()) {
      if (!it->is_number_integer() || (it->get<int>() != 0 && it->get<int>() != 1))
        throw DataError(where() + ": label must be integer 0 or 1");
      ex.label = it->get<int>();
    } else if (split == SplitKind::kLabeled) {
      throw DataError(where() + ": missing label in labeled split");
    }

    // Prepared files carry the selected sentence; raw files start from the
    // whole context.
    if (auto it = rec.find("sentence"); it != rec.end() && it->is_string()) {
      ex.sentence = it->get<std::string>();
    } else {
      ex.sentence = ex.context;
    }
    auto span = find_term(ex.sentence, term);
    if (!span) throw DataError("record " + ex.id + ": term '" + term + "' does not occur in context");
    ex.term_span = *span;
    ex.term_surface = ex.sentence.substr(span->begin, span->size());
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> load_examples(const std::filesystem::path& path, SplitKind split,
                                   std::string_view schema) {
  if (schema != kExamplesJsonlV1) throw UsageError("unknown ingestion format: " + std::string(schema));
  return parse_examples(read_file(path), split);
}

std::string examples_to_jsonl(const std::vector<Example>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    json rec = {{"id", ex.id},
                {"context", ex.context},
                {"term", ex.term_surface},
                {"pet_id", ex.pet_id},
                {"sentence", ex.sentence},
                {"term_span", {ex.term_span.begin, ex.term_span.end}}};
    if (ex.label) rec["label"] = *ex.label;
    out += rec.dump();
    out.push_back('\n');
  }
  return out;
}

// --- preprocessing -------------------------------------------------------

std::string clean_text(std::string_view text) {
  const auto tokens = split_ws(text);
  std::string out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (tokens[i] == "@") {
      std::size_t j = i;
      while (j < tokens.size() && tokens[j] == "@") ++j;
      if (j - i >= 2) {
        i = j;
        continue;
      }
    }
    if (!out.empty()) out.push_back(' ');
    out.append(tokens[i]);
    ++i;
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view cleaned) {
  std::vector<std::string> sentences;
  std::string current;
  for (auto tok : split_ws(cleaned)) {
    if (!current.empty()) current.push_back(' ');
    current.append(tok);
    if (ends_sentence(tok)) sentences.push_back(std::exchange(current, {}));
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  return sentences;
}

std::optional<TermSpan> find_term(std::string_view text, std::string_view term) {
  if (term.empty() || term.size() > text.size()) return std::nullopt;
  const auto matches_at = [&](std::size_t i, bool fold) {
    for (std::size_t k = 0; k < term.size(); ++k) {
      char a = text[i + k], b = term[k];
      if (fold ? lower(a) != lower(b) : a != b) return false;
    }
    return true;
  };
  const auto whole_word = [&](std::size_t i) {
    bool left = i == 0 || !is_word(text[i - 1]) || !is_word(term.front());
    std::size_t e = i + term.size();
    bool right = e == text.size() || !is_word(text[e]) || !is_word(term.back());
    return left && right;
  };
  for (int pass = 0; pass < 4; ++pass) {
    const bool fold = pass % 2 == 1;
    const bool need_word = pass < 2;
    for (std::size_t i = 0; i + term.size() <= text.size(); ++i) {
      if (matches_at(i, fold) && (!need_word || whole_word(i))) return TermSpan{i, i + term.size()};
    }
  }
  return std::nullopt;
}

Example preprocess(const Example& example) {
  const std::string term = clean_text(example.term_surface);
  Example out = example;
  for (auto& sentence : split_sentences(clean_text(example.context))) {
    if (auto span = find_term(sentence, term)) {
      out.term_span = *span;
      out.term_surface = sentence.substr(span->begin, span->size());
      out.sentence = std::move(sentence);
      return out;
    }
  }
  throw DataError("record " + example.id + ": term '" + example.term_surface +
                  "' not found in any sentence after cleaning");
}

std::vector<Example> preprocess_all(const std::vector<Example>& examples) {
  std::vector<Example> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(preprocess(ex));
  return out;
}

// --- lexicon -------------------------------------------------------------

Lexicon::Lexicon(std::vector<PetEntry> entries, LexiconMode mode)
    : entries_(std::move(entries)), mode_(mode) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.pet_id.empty()) throw DataError("lexicon entry " + std::to_string(i) + " has an empty pet_id");
    if (!index_.emplace(e.pet_id, i).second) throw DataError("duplicate pet_id in lexicon: " + e.pet_id);
    if (mode_ == LexiconMode::kStrict && e.description.empty())
      throw DataError("empty description for pet_id " + e.pet_id + " (strict mode)");
  }
}

const PetEntry* Lexicon::find(std::string_view pet_id) const {
  auto it = index_.find(std::string(pet_id));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

const PetEntry& Lexicon::at(std::string_view pet_id) const {
  if (const auto* e = find(pet_id)) return *e;
  throw NotFound("unknown pet_id: " + std::string(pet_id));
}

DescriptionLookup Lexicon::lookup_description(std::string_view pet_id) const {
  if (const auto* e = find(pet_id)) return {e->description, std::nullopt};
  if (mode_ == LexiconMode::kStrict) throw NotFound("unknown pet_id: " + std::string(pet_id));
  return {std::string{}, "unknown pet_id " + std::string(pet_id) + "; using empty description"};
}

void Lexicon::set_description(std::string_view pet_id, std::string description) {
  auto it = index_.find(std::string(pet_id));
  if (it == index_.end()) throw NotFound("unknown pet_id: " + std::string(pet_id));
  entries_[it->second].description = std::move(description);
}

std::vector<PetEntry> parse_lexicon(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed lexicon JSON: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("lexicon must be a JSON array");
  std::vector<PetEntry> entries;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    const auto where = "lexicon entry " + std::to_string(i);
    if (!obj.is_object()) throw DataError(where + " is not an object");
    PetEntry e;
    try {
      e.pet_id = obj.at("pet_id").get<std::string>();
      e.term = obj.at("term").get<std::string>();
      e.description = obj.value("description", std::string{});
      if (auto it = obj.find("variants"); it != obj.end()) e.variants = it->get<std::vector<std::string>>();
    } catch (const json::exception& ex) {
      throw DataError(where + ": " + ex.what());
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

Lexicon load_lexicon(const std::filesystem::path& path, LexiconMode mode) {
  return Lexicon(parse_lexicon(read_file(path)), mode);
}

std::string lexicon_to_json(const std::vector<PetEntry>& entries) {
  json doc = json::array();
  for (const auto& e : entries) {
    doc.push_back({{"pet_id", e.pet_id}, {"term", e.term}, {"description", e.description}, {"variants", e.variants}});
  }
  return doc.dump(2) + "\n";
}

CoverageReport lexicon_coverage(const std::vector<Example>& examples, const Lexicon& lexicon) {
  std::set<std::string> ids;
  for (const auto& ex : examples) ids.insert(ex.pet_id);
  CoverageReport report;
  report.distinct_pets = ids.size();
  for (const auto& id : ids) {
    const auto* e = lexicon.find(id);
    if (e == nullptr) report.missing.push_back(id);
    else if (e->description.empty()) report.empty_description.push_back(id);
  }
  return report;
}

// --- folds ---------------------------------------------------------------

std::vector<Fold> make_folds(const std::vector<Example>& labeled, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw UsageError("n_folds must be at least 2");
  if (static_cast<std::size_t>(n_folds) > labeled.size())
    throw UsageError("n_folds (" + std::to_string(n_folds) + ") exceeds number of examples (" +
                     std::to_string(labeled.size()) + ")");

  std::vector<std::size_t> pos, neg;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    const auto& ex = labeled[i];
    if (!ex.label) throw UsageError("make_folds: example " + ex.id + " is unlabeled");
    if (!seen.insert(ex.id).second) throw DataError("make_folds: duplicate id " + ex.id);
    (*ex.label == 1 ? pos : neg).push_back(i);
  }
  Rng rng(seed);
  shuffle(pos, rng);
  shuffle(neg, rng);

  // Dealing positives first, then negatives, round-robin keeps both the fold
  // sizes and the per-fold positive counts within one of each other.
  std::vector<int> fold_of(labeled.size());
  std::vector<Fold> folds(static_cast<std::size_t>(n_folds));
  std::size_t dealt = 0;
  for (const auto* group : {&pos, &neg}) {
    for (auto idx : *group) {
      auto f = static_cast<int>(dealt++ % static_cast<std::size_t>(n_folds));
      fold_of[idx] = f;
      folds[f].val_ids.push_back(labeled[idx].id);
    }
  }
  for (int f = 0; f < n_folds; ++f) {
    folds[f].index = f;
    for (std::size_t i = 0; i < labeled.size(); ++i)
      if (fold_of[i] != f) folds[f].train_ids.push_back(labeled[i].id);
  }
  return folds;
}

std::string folds_to_json(const std::vector<Fold>& folds, std::uint64_t seed) {
  json doc = {{"seed", seed}, {"n_folds", folds.size()}, {"folds", json::array()}};
  for (const auto& f : folds) {
    doc["folds"].push_back({{"index", f.index}, {"train_ids", f.train_ids}, {"val_ids", f.val_ids}});
  }
  return doc.dump(2) + "\n";
}

std::vector<Fold> parse_folds(std::string_view text, std::uint64_t* seed) {
  try {
    auto doc = json::parse(text);
    if (seed) *seed = doc.at("seed").get<std::uint64_t>();
    std::vector<Fold> folds;
    for (const auto& f : doc.at("folds")) {
      folds.push_back(Fold{f.at("index").get<int>(), f.at("train_ids").get<std::vector<std::string>>(),
                           f.at("val_ids").get<std::vector<std::string>>()});
    }
    if (folds.size() != doc.at("n_folds").get<std::size_t>())
      throw DataError("folds file: n_folds does not match number of folds");
    return folds;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed folds file: ") + e.what());
  }
}

}  // namespace euph
