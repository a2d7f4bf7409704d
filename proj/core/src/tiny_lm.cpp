#include "euph/tiny_lm.hpp"

#include <cmath>

#include "euph/error.hpp"
#include "euph/random.hpp"

namespace euph {

void TrainableLanguageModel::zero_grad() {
  for (auto& p : parameters()) std::fill(p.grad, p.grad + p.size(), 0.0);
}

namespace {

void fill_uniform(Eigen::MatrixXd& m, Rng& rng, double scale) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = uniform(rng, -scale, scale);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

TinyLanguageModel::TinyLanguageModel(TinyLmConfig config) : config_(config), tokenizer_(config.buckets) {
  const auto h = static_cast<Eigen::Index>(config_.hidden);
  if (h == 0 || config_.max_positions == 0) throw UsageError("TinyLanguageModel: hidden and max_positions must be > 0");
  const auto v = static_cast<Eigen::Index>(tokenizer_.vocab_size());
  const auto l = static_cast<Eigen::Index>(config_.max_positions);
  const double scale = 1.0 / std::sqrt(static_cast<double>(h));

  Rng rng(mix_seed(config_.seed, 0x746e79));
  token_emb_.resize(v, h);
  pos_emb_.resize(l, h);
  w_mix_.resize(h, h);
  w_first_.resize(h, h);
  w_ctx_.resize(h, h);
  w_head_.resize(2, h);
  fill_uniform(token_emb_, rng, 1.0);
  fill_uniform(pos_emb_, rng, 0.02);
  fill_uniform(w_mix_, rng, scale);
  fill_uniform(w_first_, rng, scale);
  fill_uniform(w_ctx_, rng, scale);
  fill_uniform(w_head_, rng, scale);
  b_mix_ = Eigen::VectorXd::Zero(h);
  b_pool_ = Eigen::VectorXd::Zero(h);
  b_head_ = Eigen::VectorXd::Zero(2);

  g_token_emb_ = Eigen::MatrixXd::Zero(v, h);
  g_pos_emb_ = Eigen::MatrixXd::Zero(l, h);
  g_w_mix_ = Eigen::MatrixXd::Zero(h, h);
  g_w_first_ = Eigen::MatrixXd::Zero(h, h);
  g_w_ctx_ = Eigen::MatrixXd::Zero(h, h);
  g_w_head_ = Eigen::MatrixXd::Zero(2, h);
  g_b_mix_ = Eigen::VectorXd::Zero(h);
  g_b_pool_ = Eigen::VectorXd::Zero(h);
  g_b_head_ = Eigen::VectorXd::Zero(2);
}

Eigen::MatrixXd TinyLanguageModel::embed(std::span<const TokenId> ids) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), token_emb_.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= token_emb_.rows()) throw BackendError("token id out of range: " + std::to_string(ids[i]));
    out.row(static_cast<Eigen::Index>(i)) = token_emb_.row(ids[i]);
  }
  return out;
}

TinyLanguageModel::Activations TinyLanguageModel::run(const InputSequence& input) const {
  const auto n = input.vectors.rows();
  if (n == 0) throw BackendError("empty input sequence");
  if (input.vectors.cols() != static_cast<Eigen::Index>(config_.hidden))
    throw BackendError("input width " + std::to_string(input.vectors.cols()) + " != hidden size " +
                       std::to_string(config_.hidden));
  if (static_cast<std::size_t>(n) > config_.max_positions)
    throw BackendError("sequence of " + std::to_string(n) + " positions exceeds maximum " +
                       std::to_string(config_.max_positions));
  if (input.attended.size() != static_cast<std::size_t>(n)) throw BackendError("attention mask length mismatch");

  Activations a;
  a.u = input.vectors + pos_emb_.topRows(n);
  a.s = ((a.u * w_mix_.transpose()).rowwise() + b_mix_.transpose()).array().tanh().matrix();
  a.c = Eigen::VectorXd::Zero(w_mix_.rows());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (input.attended[static_cast<std::size_t>(i)]) {
      a.c += a.s.row(i).transpose();
      a.attended += 1.0;
    }
  }
  if (a.attended == 0) throw BackendError("no attended positions");
  a.c /= a.attended;
  a.r = (w_first_ * a.u.row(0).transpose() + w_ctx_ * a.c + b_pool_).array().tanh().matrix();
  const Eigen::Vector2d logits = w_head_ * a.r + b_head_;
  a.p = sigmoid(logits[1] - logits[0]);
  return a;
}

double TinyLanguageModel::forward(const InputSequence& input) const { return run(input).p; }

double TinyLanguageModel::forward_backward(const InputSequence& input, int label, double weight,
                                           Eigen::MatrixXd* input_grad) {
  const Activations a = run(input);
  const auto n = input.vectors.rows();
  // d NLL / d (logit_1 - logit_0) for a two-way softmax.
  const double g = weight * (a.p - static_cast<double>(label));

  g_w_head_.row(1) += g * a.r.transpose();
  g_w_head_.row(0) -= g * a.r.transpose();
  g_b_head_[1] += g;
  g_b_head_[0] -= g;

  const Eigen::VectorXd dr = g * (w_head_.row(1) - w_head_.row(0)).transpose();
  const Eigen::VectorXd da = dr.array() * (1.0 - a.r.array().square());
  g_w_first_ += da * a.u.row(0);
  g_w_ctx_ += da * a.c.transpose();
  g_b_pool_ += da;

  Eigen::MatrixXd du = Eigen::MatrixXd::Zero(n, a.u.cols());
  du.row(0) += (w_first_.transpose() * da).transpose();
  const Eigen::VectorXd dc = w_ctx_.transpose() * da;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!input.attended[static_cast<std::size_t>(i)]) continue;
    const Eigen::VectorXd dz = (dc / a.attended).array() * (1.0 - a.s.row(i).transpose().array().square());
    g_w_mix_ += dz * a.u.row(i);
    g_b_mix_ += dz;
    du.row(i) += (w_mix_.transpose() * dz).transpose();
  }
  g_pos_emb_.topRows(n) += du;
  if (input_grad) *input_grad = std::move(du);
  return a.p;
}

void TinyLanguageModel::accumulate_embedding_grad(std::span<const TokenId> ids, const Eigen::MatrixXd& row_grads) {
  if (static_cast<std::size_t>(row_grads.rows()) != ids.size())
    throw BackendError("embedding gradient rows do not match token count");
  for (std::size_t i = 0; i < ids.size(); ++i) g_token_emb_.row(ids[i]) += row_grads.row(static_cast<Eigen::Index>(i));
}

std::vector<Parameter> TinyLanguageModel::parameters() {
  const auto view = [](std::string name, auto& value, auto& grad) {
    return Parameter{std::move(name), value.data(), grad.data(), value.rows(), value.cols()};
  };
  return {
      view("token_embedding", token_emb_, g_token_emb_),
      view("position_embedding", pos_emb_, g_pos_emb_),
      view("mix.weight", w_mix_, g_w_mix_),
      view("mix.bias", b_mix_, g_b_mix_),
      view("pool.first", w_first_, g_w_first_),
      view("pool.context", w_ctx_, g_w_ctx_),
      view("pool.bias", b_pool_, g_b_pool_),
      view("head.weight", w_head_, g_w_head_),
      view("head.bias", b_head_, g_b_head_),
  };
}

}  // namespace euph
