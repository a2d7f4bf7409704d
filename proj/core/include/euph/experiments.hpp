#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "euph/classifier.hpp"
#include "euph/corpus.hpp"
#include "euph/imagery.hpp"
#include "euph/metrics.hpp"
#include "euph/stats.hpp"

namespace euph {

struct TrainConfig {
  double learning_rate = 5e-6;
  int max_epochs = 50;
  int batch_size = 16;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Accepted for configuration parity with GPU recipes; the CPU trainer
  // always runs in float64.
  bool mixed_precision = false;
  std::uint64_t seed = 0;
  Variant variant = Variant::kDesc;
  int n_folds = kDefaultFolds;

  void validate() const;

  // Recipes for the full-scale runs with base- and large-size backends.
  static TrainConfig reference_base(Variant variant);
  static TrainConfig reference_large(Variant variant);
};

// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(double lr, double beta1, double beta2, double eps, double weight_decay);

  void step(const std::vector<Parameter>& params);
  long steps() const { return steps_; }

 private:
  double lr_, beta1_, beta2_, eps_, wd_;
  long steps_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Term / description imagery per pet_id, computed before training so every
// fold reads the same immutable table.
using ImageryTable = std::map<std::string, ImageryPair, std::less<>>;

// Builds the table for every entry, computing missing embeddings.
ImageryTable build_imagery_table(const Lexicon& lexicon, ImageryStore& store);
// Cache-only variant; throws NotFound naming the cache path on a miss.
ImageryTable load_imagery_table(const Lexicon& lexicon, const ImageryStore& store);

// Examples by id plus the prompts for a given variant.
class PromptSet {
 public:
  PromptSet(const std::vector<Example>& examples, const Lexicon& lexicon, const ClassifierConfig& config,
            const ImageryTable* imagery);

  const Prompt& prompt(std::string_view id) const;
  const Example& example(std::string_view id) const;
  std::optional<ImageryPair> imagery(std::string_view id) const;

 private:
  std::map<std::string, Example, std::less<>> examples_;
  std::map<std::string, Prompt, std::less<>> prompts_;
  const ImageryTable* imagery_;
  bool needs_imagery_;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double val_f1 = 0;
  long optimizer_steps = 0;  // cumulative
};

struct FoldResult {
  Classifier best;
  double best_val_f1 = 0;
  int best_epoch = 0;
  std::vector<EpochLog> log;
};

// Fine-tunes a fresh classifier on the fold's training ids, evaluating F1 on
// its validation ids after every epoch. Returns the earliest best epoch.
// Throws NumericError naming the epoch if the loss becomes non-finite.
FoldResult train_fold(const TrainConfig& train, const ClassifierConfig& model, const Fold& fold,
                      const std::vector<Example>& data, const Lexicon& lexicon, const ImageryTable* imagery,
                      std::size_t buckets = 4096);

std::vector<double> predict_probabilities(const Classifier& model, const std::vector<Example>& examples,
                                          const Lexicon& lexicon, const ImageryTable* imagery);

struct RunResult {
  std::vector<double> per_fold_f1;
  double mean_f1 = 0;
  double std_f1 = 0;
  std::vector<int> best_epochs;
  std::vector<std::string> test_ids;
  std::vector<std::vector<double>> per_fold_test_probs;  // folds x test examples
  std::string config_digest;
};

// Mean and sample std of the fold scores.
void summarize(RunResult& result);

struct CvOptions {
  int jobs = 1;  // folds trained concurrently
  std::size_t buckets = 4096;
  // Invoked once per fold, in fold order, after all folds finish.
  std::function<void(const Fold&, FoldResult&)> on_fold;
};

RunResult run_cv(const TrainConfig& train, const ClassifierConfig& model, const std::vector<Fold>& folds,
                 const std::vector<Example>& data, const Lexicon& lexicon, const ImageryTable* imagery,
                 const std::vector<Example>* test, const CvOptions& options = {});

std::string data_digest(const std::vector<Example>& examples);
std::string config_digest(const TrainConfig& train, const ClassifierConfig& model, std::string_view data_digest);

// --- artifacts -----------------------------------------------------------

struct MetricsArtifact {
  std::string name;       // e.g. "desc_imag"
  std::string lm_size;    // free-form backend size label, e.g. "tiny", "large"
  Variant variant = Variant::kDesc;
  RunResult result;
  std::vector<int> ensemble_predictions;
  std::optional<double> test_f1;
  std::optional<SignificanceResult> significance;
  std::string significance_against;
};

std::string metrics_to_json(const MetricsArtifact& m);
MetricsArtifact parse_metrics(std::string_view json);

std::string significance_to_json(const SignificanceResult& r);

// Markdown table: model, backend size, validation mean +- std, test F1.
std::string render_report(const std::vector<MetricsArtifact>& runs);

}  // namespace euph
