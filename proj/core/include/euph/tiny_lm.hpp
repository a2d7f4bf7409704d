#pragma once

#include <cstdint>
#include <memory>

#include "euph/language_model.hpp"

namespace euph {

struct TinyLmConfig {
  std::size_t hidden = 32;
  std::size_t max_positions = 128;
  std::size_t buckets = 4096;
  std::uint64_t seed = 0;
};

// Small differentiable stand-in for a pretrained encoder, used for CPU runs
// and tests:
//
//   u_i = x_i + pos_i
//   s_i = tanh(W_mix u_i + b_mix)
//   c   = masked mean of s_i
//   r   = tanh(W_first u_0 + W_ctx c + b_pool)      (first-position pooling)
//   p   = softmax(W_head r + b_head)[1]
class TinyLanguageModel final : public TrainableLanguageModel {
 public:
  static constexpr const char* kId = "tiny";

  explicit TinyLanguageModel(TinyLmConfig config);

  std::string id() const override { return kId; }
  const Tokenizer& tokenizer() const override { return tokenizer_; }
  std::size_t hidden_size() const override { return config_.hidden; }
  std::size_t max_positions() const override { return config_.max_positions; }
  const TinyLmConfig& config() const { return config_; }

  Eigen::MatrixXd embed(std::span<const TokenId> ids) const override;
  double forward(const InputSequence& input) const override;

  double forward_backward(const InputSequence& input, int label, double weight, Eigen::MatrixXd* input_grad) override;
  void accumulate_embedding_grad(std::span<const TokenId> ids, const Eigen::MatrixXd& row_grads) override;
  std::vector<Parameter> parameters() override;
  std::unique_ptr<TrainableLanguageModel> clone() const override {
    return std::make_unique<TinyLanguageModel>(*this);
  }

 private:
  struct Activations {
    Eigen::MatrixXd u;  // positions x H
    Eigen::MatrixXd s;  // positions x H
    Eigen::VectorXd c;
    Eigen::VectorXd r;
    double attended = 0;
    double p = 0;
  };
  Activations run(const InputSequence& input) const;

  TinyLmConfig config_;
  HashingTokenizer tokenizer_;

  Eigen::MatrixXd token_emb_, pos_emb_;  // rows are vectors
  Eigen::MatrixXd w_mix_, w_first_, w_ctx_, w_head_;
  Eigen::VectorXd b_mix_, b_pool_, b_head_;

  Eigen::MatrixXd g_token_emb_, g_pos_emb_;
  Eigen::MatrixXd g_w_mix_, g_w_first_, g_w_ctx_, g_w_head_;
  Eigen::VectorXd g_b_mix_, g_b_pool_, g_b_head_;
};

}  // namespace euph
