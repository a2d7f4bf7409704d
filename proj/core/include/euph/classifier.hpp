#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "euph/language_model.hpp"
#include "euph/prompting.hpp"

namespace euph {

enum class Variant { kVanilla, kDesc, kDescImag };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);  // UsageError on unknown names
PromptVariant prompt_variant(Variant v);

inline constexpr double kDefaultThreshold = 0.5;
inline constexpr double kProbabilityEpsilon = 1e-7;

struct ClassifierConfig {
  Variant variant = Variant::kDesc;
  std::string lm_backend_id = "tiny";
  std::size_t hidden_size = 32;
  std::size_t imagery_dim = 64;
  std::size_t max_tokens = 128;
  double threshold = kDefaultThreshold;
  std::uint64_t seed = 0;
  PromptTemplate prompt_template;

  void validate() const;
};

// Linear map f_p from visual-embedding space to token-embedding space:
// f_p(v) = weight^T v + bias, weight is D_v x H.
struct Projection {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;

  // Uniform in [-1/sqrt(D_v), 1/sqrt(D_v)], zero bias.
  static Projection random(std::size_t imagery_dim, std::size_t hidden, std::uint64_t seed);
  static Projection zeros(std::size_t imagery_dim, std::size_t hidden);

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.cols()); }
};

Eigen::VectorXd project(const Eigen::VectorXd& v, const Projection& proj);

struct ImageryPair {
  Eigen::VectorXd term;
  Eigen::VectorXd description;
};

struct Prediction {
  double p_hat = 0;
  int y_hat = 0;
};

int decide(double p_hat, double threshold = kDefaultThreshold);

// -log p for y=1, -log(1-p) for y=0, with p clamped to [eps, 1-eps].
double loss(double p_hat, int y);
double batch_loss(std::span<const double> p_hat, std::span<const int> y);

struct AssembledInput {
  InputSequence sequence;
  std::vector<TokenId> token_ids;  // the rows after the prepended vectors
  EncodedPrompt encoded;
};

// Builds [f_p(v_T), f_p(v_D), e_1 ... e_n] for desc_imag and [e_1 ... e_n]
// otherwise; every position is attended. The text budget is max_tokens minus
// the prepended positions.
AssembledInput assemble_input(const Prompt& prompt, const ImageryPair* imagery, const ClassifierConfig& config,
                              const Projection& proj, const LanguageModel& lm);

Prediction score(const Prompt& prompt, const std::optional<ImageryPair>& imagery, const ClassifierConfig& config,
                 const Projection& proj, const LanguageModel& lm);

// Backend plus projection plus configuration; the unit that is trained,
// checkpointed and scored.
class Classifier {
 public:
  Classifier(ClassifierConfig config, std::unique_ptr<TrainableLanguageModel> lm);
  Classifier(ClassifierConfig config, std::unique_ptr<TrainableLanguageModel> lm, Projection proj);

  Classifier(Classifier&&) noexcept = default;
  Classifier& operator=(Classifier&&) noexcept = default;

  const ClassifierConfig& config() const { return config_; }
  const Projection& projection() const { return proj_; }
  Projection& projection() { return proj_; }
  const TrainableLanguageModel& lm() const { return *lm_; }
  TrainableLanguageModel& lm() { return *lm_; }

  Prediction predict(const Prompt& prompt, const std::optional<ImageryPair>& imagery) const;

  // Backpropagates weight * NLL into backend and projection gradients.
  // Returns p_hat.
  double accumulate(const Prompt& prompt, const std::optional<ImageryPair>& imagery, int label, double weight);

  // Backend parameters followed by the projection (only for desc_imag).
  std::vector<Parameter> parameters();
  void zero_grad();

  Classifier clone() const;

 private:
  ClassifierConfig config_;
  std::unique_ptr<TrainableLanguageModel> lm_;
  Projection proj_;
  Eigen::MatrixXd g_weight_;
  Eigen::VectorXd g_bias_;
};

// Backend factory keyed by lm_backend_id. Only "tiny" ships built in.
std::unique_ptr<TrainableLanguageModel> make_language_model(const ClassifierConfig& config, std::size_t buckets = 4096);

}  // namespace euph
