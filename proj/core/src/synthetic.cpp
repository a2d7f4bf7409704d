#include "euph/synthetic.hpp"

#include <array>

#include <json.hpp>

#include "euph/error.hpp"
#include "euph/random.hpp"

namespace euph {

namespace {

constexpr std::array<const char*, 6> kEuphemistic = {
    "People at the office said , quietly , that it was {T} .",
    "She chose her words gently and called it {T} .",
    "The family letter politely described the matter as {T} .",
    "Out of respect they only ever said {T} when it came up .",
    "His voice dropped as he explained it was {T} , nothing more .",
    "We tactfully agreed to call it {T} and moved on .",
};

constexpr std::array<const char*, 6> kLiteral = {
    "The label on the crate literally read {T} in red ink .",
    "In the plain physical sense the sign said {T} .",
    "The glossary lists {T} with its ordinary technical meaning .",
    "He typed the exact words {T} into the search bar .",
    "The museum placard printed {T} beneath the old photograph .",
    "Our teacher wrote {T} on the whiteboard for spelling practice .",
};

// Label-neutral wording, so the task is not trivially separable.
constexpr std::array<const char*, 4> kNeutral = {
    "Someone mentioned {T} during lunch .",
    "The word {T} came up twice in the conversation .",
    "They talked about {T} for a while .",
    "I heard {T} on the radio this morning .",
};

constexpr std::array<const char*, 8> kFiller = {
    "It rained for most of the afternoon .",
    "The bus arrived ten minutes early .",
    "Nobody remembered to bring the keys !",
    "Was the kettle still warm ?",
    "The neighbours were painting their fence .",
    "A dog barked somewhere down the street .",
    "Coffee was served in paper cups .",
    "The meeting ran longer than planned .",
};

std::string fill(const char* tmpl, const std::string& term) {
  std::string s = tmpl;
  auto at = s.find("{T}");
  s.replace(at, 3, term);
  return s;
}

template <std::size_t N>
const char* pick(const std::array<const char*, N>& xs, Rng& rng) {
  return xs[uniform_index(rng, N)];
}

Example make_example(std::string id, const PetEntry& pet, std::optional<int> label, const SyntheticCorpusSpec& spec,
                     Rng& rng) {
  const char* tmpl = nullptr;
  if (uniform01(rng) < spec.ambiguity_rate) tmpl = pick(kNeutral, rng);
  else if (label.value_or(uniform01(rng) < 0.5) == 1) tmpl = pick(kEuphemistic, rng);
  else tmpl = pick(kLiteral, rng);
  const std::string core = fill(tmpl, pet.term);
  std::string context;
  const auto n_before = uniform_index(rng, 2);
  const auto n_after = uniform_index(rng, 2);
  for (std::uint64_t i = 0; i < n_before; ++i) context += std::string(pick(kFiller, rng)) + " ";
  context += core;
  for (std::uint64_t i = 0; i < n_after; ++i) context += std::string(" ") + pick(kFiller, rng);
  if (uniform01(rng) < spec.noise_rate) {
    const auto run = 2 + uniform_index(rng, 5);
    std::string ats;
    for (std::uint64_t i = 0; i < run; ++i) ats += " @";
    // Inserted after the first sentence break, or at the end.
    auto dot = context.find(" . ");
    if (dot == std::string::npos) context += ats;
    else context.insert(dot + 2, ats.substr(1) + " ");
  }
  Example ex;
  ex.id = std::move(id);
  ex.context = context;
  ex.sentence = context;
  ex.pet_id = pet.pet_id;
  ex.label = label;
  auto span = find_term(context, pet.term);
  ex.term_span = *span;
  ex.term_surface = context.substr(span->begin, span->size());
  return ex;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(const Lexicon& lexicon, const SyntheticCorpusSpec& spec) {
  if (lexicon.empty()) throw UsageError("synthetic corpus needs a non-empty lexicon");
  const auto& pets = lexicon.entries();
  Rng rng(spec.seed);
  SyntheticCorpus out;
  for (std::size_t i = 0; i < spec.n_labeled; ++i) {
    const auto& pet = i < pets.size() ? pets[i] : pets[uniform_index(rng, pets.size())];
    const int label = uniform01(rng) < spec.positive_rate ? 1 : 0;
    char id[32];
    std::snprintf(id, sizeof id, "train-%05zu", i);
    out.labeled.push_back(make_example(id, pet, label, spec, rng));
  }
  for (std::size_t i = 0; i < spec.n_unlabeled; ++i) {
    const auto& pet = pets[uniform_index(rng, pets.size())];
    char id[32];
    std::snprintf(id, sizeof id, "test-%05zu", i);
    out.unlabeled.push_back(make_example(id, pet, std::nullopt, spec, rng));
  }
  return out;
}

std::string raw_examples_to_jsonl(const std::vector<Example>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    nlohmann::json rec = {{"id", ex.id}, {"context", ex.context}, {"term", ex.term_surface}, {"pet_id", ex.pet_id}};
    if (ex.label) rec["label"] = *ex.label;
    out += rec.dump();
    out.push_back('\n');
  }
  return out;
}

ToyTask make_separable_toy(std::size_t n, std::uint64_t seed) {
  std::vector<PetEntry> pets = {
      {"late", "late", "old person, elderly", {}},
      {"lavatory", "lavatory", "restroom, toilet", {}},
      {"pass_on", "pass on", "death, dying", {}},
      {"senior_citizen", "senior citizen", "old person, elderly", {}},
  };
  Rng rng(seed);
  ToyTask task{{}, Lexicon(pets)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pet = pets[i % pets.size()];
    const int label = static_cast<int>((i / pets.size()) % 2);
    const std::string sentence = label == 1 ? "They whispered gently that it was " + pet.term + " ."
                                            : "The printed sign said " + pet.term + " in bold letters .";
    Example ex;
    ex.id = "toy-" + std::to_string(i);
    ex.context = sentence;
    ex.sentence = sentence;
    ex.pet_id = pet.pet_id;
    ex.label = label;
    ex.term_span = *find_term(sentence, pet.term);
    ex.term_surface = pet.term;
    task.examples.push_back(preprocess(ex));
  }
  shuffle(task.examples, rng);
  return task;
}

}  // namespace euph
