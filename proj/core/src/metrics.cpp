#include "euph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "euph/error.hpp"

namespace euph {

Confusion confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw UsageError("f1: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if ((predictions[i] | labels[i]) & ~1) throw UsageError("f1: labels must be 0 or 1 (index " + std::to_string(i) + ")");
    const bool p = predictions[i] == 1, y = labels[i] == 1;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1(std::span<const int> predictions, std::span<const int> labels) {
  const auto c = confusion(predictions, labels);
  if (c.tp + c.fp == 0 || c.tp + c.fn == 0) return 0.0;
  const double precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::vector<double> column_means(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw UsageError("ensemble: no fold rows");
  const std::size_t n = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].size() != n) throw UsageError("ensemble: ragged matrix at row " + std::to_string(r));
  std::vector<double> means(n), column(rows.size());
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      column[r] = rows[r][j];
      if (!(column[r] >= 0.0 && column[r] <= 1.0)) throw UsageError("ensemble: probability outside [0,1]");
    }
    // Sorted, compensated summation: the fold order cannot change the result,
    // and e.g. 0.6 + 0.7 + 0.2 rounds to 1.5, so its mean sits on the threshold.
    std::sort(column.begin(), column.end());
    double sum = 0.0, carry = 0.0;
    for (double x : column) {
      const double t = sum + x;
      carry += std::fabs(sum) >= std::fabs(x) ? (sum - t) + x : (x - t) + sum;
      sum = t;
    }
    means[j] = (sum + carry) / static_cast<double>(rows.size());
  }
  return means;
}

std::vector<int> ensemble(const std::vector<std::vector<double>>& per_fold_probs, double threshold,
                          EnsembleRule rule) {
  const auto means = column_means(per_fold_probs);  // validates shape and range
  std::vector<int> out(means.size());
  if (rule == EnsembleRule::kMeanProbability) {
    for (std::size_t j = 0; j < means.size(); ++j) out[j] = decide(means[j], threshold);
    return out;
  }
  for (std::size_t j = 0; j < means.size(); ++j) {
    std::size_t votes = 0;
    for (const auto& row : per_fold_probs) votes += static_cast<std::size_t>(decide(row[j], threshold));
    out[j] = 2 * votes >= per_fold_probs.size() ? 1 : 0;
  }
  return out;
}

}  // namespace euph
