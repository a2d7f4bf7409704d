#include "euph/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "euph/error.hpp"
#include "euph/random.hpp"
#include "euph/tiny_lm.hpp"

namespace euph {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kVanilla: return "vanilla";
    case Variant::kDesc: return "desc";
    case Variant::kDescImag: return "desc_imag";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "vanilla") return Variant::kVanilla;
  if (name == "desc") return Variant::kDesc;
  if (name == "desc_imag") return Variant::kDescImag;
  throw UsageError("unknown variant '" + std::string(name) + "' (expected vanilla, desc or desc_imag)");
}

PromptVariant prompt_variant(Variant v) {
  return v == Variant::kVanilla ? PromptVariant::kVanilla : PromptVariant::kDescribed;
}

void ClassifierConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("threshold must lie in (0, 1)");
  if (hidden_size == 0 || imagery_dim == 0) throw UsageError("hidden_size and imagery_dim must be positive");
  const std::size_t extra = variant == Variant::kDescImag ? 2 : 0;
  if (max_tokens < extra + 3) throw UsageError("max_tokens too small");
}

Projection Projection::random(std::size_t imagery_dim, std::size_t hidden, std::uint64_t seed) {
  Projection p = zeros(imagery_dim, hidden);
  Rng rng(mix_seed(seed, 0x70726f6a));
  const double a = 1.0 / std::sqrt(static_cast<double>(imagery_dim));
  for (Eigen::Index j = 0; j < p.weight.cols(); ++j)
    for (Eigen::Index i = 0; i < p.weight.rows(); ++i) p.weight(i, j) = uniform(rng, -a, a);
  return p;
}

Projection Projection::zeros(std::size_t imagery_dim, std::size_t hidden) {
  return Projection{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(imagery_dim), static_cast<Eigen::Index>(hidden)),
                    Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden))};
}

Eigen::VectorXd project(const Eigen::VectorXd& v, const Projection& proj) {
  if (v.size() != proj.weight.rows() || proj.bias.size() != proj.weight.cols())
    throw UsageError("project: vector of dimension " + std::to_string(v.size()) + " against a " +
                     std::to_string(proj.weight.rows()) + "x" + std::to_string(proj.weight.cols()) + " projection");
  return proj.weight.transpose() * v + proj.bias;
}

int decide(double p_hat, double threshold) { return p_hat >= threshold ? 1 : 0; }

double loss(double p_hat, int y) {
  const double p = std::clamp(p_hat, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  return y == 1 ? -std::log(p) : -std::log1p(-p);
}

double batch_loss(std::span<const double> p_hat, std::span<const int> y) {
  if (p_hat.size() != y.size() || p_hat.empty()) throw UsageError("batch_loss: size mismatch or empty batch");
  double total = 0;
  for (std::size_t i = 0; i < p_hat.size(); ++i) total += loss(p_hat[i], y[i]);
  return total / static_cast<double>(p_hat.size());
}

AssembledInput assemble_input(const Prompt& prompt, const ImageryPair* imagery, const ClassifierConfig& config,
                              const Projection& proj, const LanguageModel& lm) {
  const bool wants_imagery = config.variant == Variant::kDescImag;
  if (wants_imagery != (imagery != nullptr))
    throw UsageError(std::string("variant ") + std::string(to_string(config.variant)) +
                     (wants_imagery ? " requires" : " does not take") + " imagery (prompt " + prompt.example_id + ")");
  if (prompt.variant != prompt_variant(config.variant))
    throw UsageError("prompt " + prompt.example_id + " was built for a different variant");

  const std::size_t extra = wants_imagery ? 2 : 0;
  const std::size_t budget = std::min(config.max_tokens, lm.max_positions());
  if (budget <= extra) throw UsageError("token budget leaves no room for text");

  AssembledInput out;
  out.encoded = encode_prompt(prompt, lm.tokenizer(), budget - extra);
  out.token_ids = out.encoded.ids;
  const Eigen::MatrixXd text = lm.embed(out.token_ids);
  if (text.cols() != static_cast<Eigen::Index>(lm.hidden_size()))
    throw BackendError("backend " + lm.id() + " returned embeddings of the wrong width");

  auto& seq = out.sequence;
  seq.prepended = extra;
  seq.vectors.resize(static_cast<Eigen::Index>(extra) + text.rows(), text.cols());
  if (wants_imagery) {
    seq.vectors.row(0) = project(imagery->term, proj).transpose();
    seq.vectors.row(1) = project(imagery->description, proj).transpose();
  }
  seq.vectors.bottomRows(text.rows()) = text;
  seq.attended.assign(seq.length(), 1);
  return out;
}

Prediction score(const Prompt& prompt, const std::optional<ImageryPair>& imagery, const ClassifierConfig& config,
                 const Projection& proj, const LanguageModel& lm) {
  const auto in = assemble_input(prompt, imagery ? &*imagery : nullptr, config, proj, lm);
  double p;
  try {
    p = lm.forward(in.sequence);
  } catch (const std::exception& e) {
    throw BackendError("backend " + lm.id() + " failed on prompt " + prompt.example_id + ": " + e.what());
  }
  if (!(p >= 0.0 && p <= 1.0))
    throw BackendError("backend " + lm.id() + " returned p_hat outside [0,1] for prompt " + prompt.example_id);
  return {p, decide(p, config.threshold)};
}

Classifier::Classifier(ClassifierConfig config, std::unique_ptr<TrainableLanguageModel> lm)
    : Classifier(config, std::move(lm), Projection::random(config.imagery_dim, config.hidden_size, config.seed)) {}

Classifier::Classifier(ClassifierConfig config, std::unique_ptr<TrainableLanguageModel> lm, Projection proj)
    : config_(std::move(config)), lm_(std::move(lm)), proj_(std::move(proj)) {
  config_.validate();
  if (!lm_) throw UsageError("Classifier needs a language model");
  if (lm_->hidden_size() != config_.hidden_size)
    throw UsageError("backend hidden size " + std::to_string(lm_->hidden_size()) + " != configured " +
                     std::to_string(config_.hidden_size));
  if (proj_.in_dim() != config_.imagery_dim || proj_.out_dim() != config_.hidden_size)
    throw UsageError("projection shape does not match configuration");
  g_weight_ = Eigen::MatrixXd::Zero(proj_.weight.rows(), proj_.weight.cols());
  g_bias_ = Eigen::VectorXd::Zero(proj_.bias.size());
}

Prediction Classifier::predict(const Prompt& prompt, const std::optional<ImageryPair>& imagery) const {
  return score(prompt, imagery, config_, proj_, *lm_);
}

double Classifier::accumulate(const Prompt& prompt, const std::optional<ImageryPair>& imagery, int label,
                              double weight) {
  const auto in = assemble_input(prompt, imagery ? &*imagery : nullptr, config_, proj_, *lm_);
  Eigen::MatrixXd input_grad;
  const double p = lm_->forward_backward(in.sequence, label, weight, &input_grad);
  const auto extra = static_cast<Eigen::Index>(in.sequence.prepended);
  lm_->accumulate_embedding_grad(in.token_ids, input_grad.bottomRows(input_grad.rows() - extra));
  if (extra == 2) {
    // f_p(v) = W^T v + b, so dW += v g^T and db += g for each prepended row.
    g_weight_ += imagery->term * input_grad.row(0);
    g_weight_ += imagery->description * input_grad.row(1);
    g_bias_ += input_grad.row(0).transpose() + input_grad.row(1).transpose();
  }
  return p;
}

std::vector<Parameter> Classifier::parameters() {
  auto params = lm_->parameters();
  if (config_.variant == Variant::kDescImag) {
    params.push_back({"projection.weight", proj_.weight.data(), g_weight_.data(), proj_.weight.rows(), proj_.weight.cols()});
    params.push_back({"projection.bias", proj_.bias.data(), g_bias_.data(), proj_.bias.rows(), 1});
  }
  return params;
}

void Classifier::zero_grad() {
  lm_->zero_grad();
  g_weight_.setZero();
  g_bias_.setZero();
}

Classifier Classifier::clone() const { return Classifier(config_, lm_->clone(), proj_); }

std::unique_ptr<TrainableLanguageModel> make_language_model(const ClassifierConfig& config, std::size_t buckets) {
  if (config.lm_backend_id == TinyLanguageModel::kId) {
    return std::make_unique<TinyLanguageModel>(
        TinyLmConfig{config.hidden_size, config.max_tokens, buckets, config.seed});
  }
  throw BackendError("unknown language-model backend '" + config.lm_backend_id + "'");
}

}  // namespace euph
