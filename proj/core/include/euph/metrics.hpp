#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "euph/classifier.hpp"

namespace euph {

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Confusion confusion(std::span<const int> predictions, std::span<const int> labels);

// F1 of the positive (euphemistic) class. 0 when there are no predicted
// positives, no actual positives, or precision + recall is 0.
double f1(std::span<const int> predictions, std::span<const int> labels);

enum class EnsembleRule {
  kMeanProbability,  // average the fold probabilities, then threshold
  kMajorityVote,     // threshold each fold, ties go to the positive class
};

// One row per fold model, one column per test example.
std::vector<int> ensemble(const std::vector<std::vector<double>>& per_fold_probs,
                          double threshold = kDefaultThreshold,
                          EnsembleRule rule = EnsembleRule::kMeanProbability);

std::vector<double> column_means(const std::vector<std::vector<double>>& rows);

}  // namespace euph
