#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "euph/corpus.hpp"

namespace euph {

// Template-generated stand-in for the shared-task data: same split sizes,
// every lexicon PET used at least once in the labeled split, label-correlated
// wording, "@ @ @" runs and multi-sentence contexts.
struct SyntheticCorpusSpec {
  std::size_t n_labeled = 1573;
  std::size_t n_unlabeled = 394;
  double positive_rate = 0.65;
  double noise_rate = 0.25;  // chance of an "@ @ @" run per context
  double ambiguity_rate = 0.2;  // chance of label-neutral wording
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  std::vector<Example> labeled;    // raw, as load_examples would return them
  std::vector<Example> unlabeled;
};

SyntheticCorpus make_synthetic_corpus(const Lexicon& lexicon, const SyntheticCorpusSpec& spec = {});

// Ingestion-format JSON Lines (id, context, term, pet_id, optional label).
std::string raw_examples_to_jsonl(const std::vector<Example>& examples);

struct ToyTask {
  std::vector<Example> examples;  // preprocessed, labeled
  Lexicon lexicon;
};

// Linearly separable task: positives and negatives use disjoint cue words.
ToyTask make_separable_toy(std::size_t n = 32, std::uint64_t seed = 0);

}  // namespace euph
