#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "euph/tokenizer.hpp"

namespace euph {

// Input to a language-model backend: one H-dimensional vector per position.
// The first `prepended` rows are soft-prompt vectors supplied by the caller;
// the rest are token embeddings.
struct InputSequence {
  Eigen::MatrixXd vectors;            // positions x H
  std::vector<std::uint8_t> attended;  // 1 = attended
  std::size_t prepended = 0;

  std::size_t length() const { return static_cast<std::size_t>(vectors.rows()); }
  std::size_t text_tokens() const { return length() - prepended; }
};

// A view of one trainable tensor and its gradient accumulator, row-major
// storage not implied.
struct Parameter {
  std::string name;
  double* value = nullptr;
  double* grad = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
};

// Scoring contract of a pretrained sequence classifier: EMBED maps tokens to
// vectors, forward maps an input sequence to the probability of class 1.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::string id() const = 0;
  virtual const Tokenizer& tokenizer() const = 0;
  virtual std::size_t hidden_size() const = 0;
  virtual std::size_t max_positions() const = 0;

  virtual Eigen::MatrixXd embed(std::span<const TokenId> ids) const = 0;
  virtual double forward(const InputSequence& input) const = 0;
};

// Backends that can be fine-tuned expose their parameters and backpropagate
// the negative log-likelihood of a label.
class TrainableLanguageModel : public LanguageModel {
 public:
  // Returns p_hat. Adds weight * dNLL/dparam to every parameter gradient and,
  // if input_grad is non-null, writes weight * dNLL/dinput (positions x H).
  virtual double forward_backward(const InputSequence& input, int label, double weight,
                                  Eigen::MatrixXd* input_grad) = 0;

  // Routes gradient that reached token-embedding rows back into EMBED.
  virtual void accumulate_embedding_grad(std::span<const TokenId> ids, const Eigen::MatrixXd& row_grads) = 0;

  virtual std::vector<Parameter> parameters() = 0;
  void zero_grad();

  virtual std::unique_ptr<TrainableLanguageModel> clone() const = 0;
};

}  // namespace euph
