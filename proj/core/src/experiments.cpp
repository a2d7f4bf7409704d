#include "euph/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <future>
#include <set>
#include <sstream>

#include <json.hpp>

#include "euph/error.hpp"
#include "euph/hash.hpp"
#include "euph/random.hpp"

namespace euph {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw UsageError("learning_rate must be positive");
  if (max_epochs < 1) throw UsageError("max_epochs must be at least 1");
  if (batch_size < 1) throw UsageError("batch_size must be at least 1");
  if (weight_decay < 0) throw UsageError("weight_decay must be non-negative");
  if (n_folds < 2) throw UsageError("n_folds must be at least 2");
}

TrainConfig TrainConfig::reference_base(Variant variant) {
  TrainConfig c;
  c.variant = variant;
  c.learning_rate = 5e-6;
  c.mixed_precision = true;
  return c;
}

TrainConfig TrainConfig::reference_large(Variant variant) {
  TrainConfig c = reference_base(variant);
  c.learning_rate = 3e-6;
  return c;
}

AdamW::AdamW(double lr, double beta1, double beta2, double eps, double weight_decay)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {}

void AdamW::step(const std::vector<Parameter>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
      v_.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
    }
  }
  if (m_.size() != params.size()) throw UsageError("AdamW: parameter list changed between steps");
  ++steps_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t t = 0; t < params.size(); ++t) {
    const auto& p = params[t];
    auto& m = m_[t];
    auto& v = v_[t];
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * p.value[i]);
    }
  }
}

ImageryTable build_imagery_table(const Lexicon& lexicon, ImageryStore& store) {
  ImageryTable table;
  for (const auto& e : lexicon.entries()) {
    table.emplace(e.pet_id, ImageryPair{store.embedding_for(e.term).vector, store.embedding_for(e.description).vector});
  }
  return table;
}

ImageryTable load_imagery_table(const Lexicon& lexicon, const ImageryStore& store) {
  ImageryTable table;
  for (const auto& e : lexicon.entries()) {
    auto term = store.cached_embedding(e.term);
    auto desc = store.cached_embedding(e.description);
    if (!term || !desc) {
      const auto missing = term ? store.digest_for(e.description) : store.digest_for(e.term);
      throw NotFound("imagery cache " + store.cache().root().string() + " has no embedding for pet " + e.pet_id +
                     " (expected " + store.cache().embedding_path(missing).string() + "); run the imagery command");
    }
    table.emplace(e.pet_id, ImageryPair{std::move(term->vector), std::move(desc->vector)});
  }
  return table;
}

PromptSet::PromptSet(const std::vector<Example>& examples, const Lexicon& lexicon, const ClassifierConfig& config,
                     const ImageryTable* imagery)
    : imagery_(imagery), needs_imagery_(config.variant == Variant::kDescImag) {
  if (needs_imagery_ && imagery_ == nullptr) throw UsageError("desc_imag requires an imagery table");
  if (!needs_imagery_ && imagery_ != nullptr) throw UsageError("only desc_imag takes imagery");
  const auto pv = prompt_variant(config.variant);
  for (const auto& ex : examples) {
    const auto& entry = lexicon.at(ex.pet_id);
    prompts_.emplace(ex.id, build_prompt(pv, entry, ex, lexicon.mode(), config.prompt_template));
    if (needs_imagery_ && imagery_->find(ex.pet_id) == imagery_->end())
      throw NotFound("no imagery for pet " + ex.pet_id);
    examples_.emplace(ex.id, ex);
  }
}

const Prompt& PromptSet::prompt(std::string_view id) const {
  auto it = prompts_.find(id);
  if (it == prompts_.end()) throw NotFound("unknown example id " + std::string(id));
  return it->second;
}

const Example& PromptSet::example(std::string_view id) const {
  auto it = examples_.find(id);
  if (it == examples_.end()) throw NotFound("unknown example id " + std::string(id));
  return it->second;
}

std::optional<ImageryPair> PromptSet::imagery(std::string_view id) const {
  if (!needs_imagery_) return std::nullopt;
  return imagery_->find(example(id).pet_id)->second;
}

FoldResult train_fold(const TrainConfig& train, const ClassifierConfig& model_config, const Fold& fold,
                      const std::vector<Example>& data, const Lexicon& lexicon, const ImageryTable* imagery,
                      std::size_t buckets) {
  train.validate();
  if (train.variant != model_config.variant) throw UsageError("train and model configs disagree on the variant");
  if (fold.train_ids.empty() || fold.val_ids.empty()) throw UsageError("fold has an empty train or validation set");

  const PromptSet prompts(data, lexicon, model_config, imagery);
  for (const auto* ids : {&fold.train_ids, &fold.val_ids})
    for (const auto& id : *ids)
      if (!prompts.example(id).label) throw DataError("fold references unlabeled example " + id);

  ClassifierConfig cfg = model_config;
  cfg.seed = mix_seed(train.seed, static_cast<std::uint64_t>(fold.index));
  Classifier model(cfg, make_language_model(cfg, buckets));
  AdamW opt(train.learning_rate, train.beta1, train.beta2, train.adam_epsilon, train.weight_decay);
  const auto params = model.parameters();

  std::vector<int> val_labels;
  for (const auto& id : fold.val_ids) val_labels.push_back(*prompts.example(id).label);

  Rng rng(mix_seed(train.seed, 0x1000 + static_cast<std::uint64_t>(fold.index)));
  std::vector<std::string> order = fold.train_ids;

  FoldResult result{model.clone(), -1.0, 0, {}};
  for (int epoch = 1; epoch <= train.max_epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(train.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(train.batch_size));
      const double weight = 1.0 / static_cast<double>(end - start);
      model.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const auto& id = order[i];
        const int y = *prompts.example(id).label;
        const double p = model.accumulate(prompts.prompt(id), prompts.imagery(id), y, weight);
        loss_sum += loss(p, y);
      }
      opt.step(params);
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(train_loss))
      throw NumericError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));

    std::vector<int> preds;
    preds.reserve(fold.val_ids.size());
    for (const auto& id : fold.val_ids) preds.push_back(model.predict(prompts.prompt(id), prompts.imagery(id)).y_hat);
    const double val_f1 = f1(preds, val_labels);
    result.log.push_back({epoch, train_loss, val_f1, opt.steps()});
    if (val_f1 > result.best_val_f1) {
      result.best_val_f1 = val_f1;
      result.best_epoch = epoch;
      result.best = model.clone();
    }
  }
  return result;
}

std::vector<double> predict_probabilities(const Classifier& model, const std::vector<Example>& examples,
                                          const Lexicon& lexicon, const ImageryTable* imagery) {
  const PromptSet prompts(examples, lexicon, model.config(), imagery);
  std::vector<double> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(model.predict(prompts.prompt(ex.id), prompts.imagery(ex.id)).p_hat);
  return out;
}

void summarize(RunResult& r) {
  r.mean_f1 = r.per_fold_f1.empty() ? 0.0 : mean(r.per_fold_f1);
  r.std_f1 = sample_stddev(r.per_fold_f1);
}

RunResult run_cv(const TrainConfig& train, const ClassifierConfig& model, const std::vector<Fold>& folds,
                 const std::vector<Example>& data, const Lexicon& lexicon, const ImageryTable* imagery,
                 const std::vector<Example>* test, const CvOptions& options) {
  if (folds.empty()) throw UsageError("run_cv: no folds");
  const std::size_t n = folds.size();
  std::vector<std::optional<FoldResult>> results(n);
  std::vector<std::vector<double>> test_probs(n);

  const auto run_one = [&](std::size_t i) {
    try {
      auto r = train_fold(train, model, folds[i], data, lexicon, imagery, options.buckets);
      if (test) test_probs[i] = predict_probabilities(r.best, *test, lexicon, imagery);
      results[i] = std::move(r);
    } catch (const Error& e) {
      throw Error(e.kind(), "fold " + std::to_string(folds[i].index) + ": " + e.what());
    }
  };

  const std::size_t jobs = static_cast<std::size_t>(std::max(1, options.jobs));
  for (std::size_t wave = 0; wave < n; wave += jobs) {
    std::vector<std::future<void>> running;
    for (std::size_t i = wave; i < std::min(n, wave + jobs); ++i) {
      if (jobs == 1) run_one(i);
      else running.push_back(std::async(std::launch::async, run_one, i));
    }
    for (auto& f : running) f.get();
  }

  RunResult out;
  out.config_digest = config_digest(train, model, data_digest(data));
  for (std::size_t i = 0; i < n; ++i) {
    out.per_fold_f1.push_back(results[i]->best_val_f1);
    out.best_epochs.push_back(results[i]->best_epoch);
    if (options.on_fold) options.on_fold(folds[i], *results[i]);
  }
  if (test) {
    for (const auto& ex : *test) out.test_ids.push_back(ex.id);
    out.per_fold_test_probs = std::move(test_probs);
  }
  summarize(out);
  return out;
}

std::string data_digest(const std::vector<Example>& examples) {
  FieldHasher h;
  for (const auto& ex : examples) {
    h.add(ex.id).add(ex.sentence).add(ex.term_surface).add(ex.pet_id).add(static_cast<std::int64_t>(ex.label.value_or(-1)));
  }
  return h.hex_digest();
}

std::string config_digest(const TrainConfig& t, const ClassifierConfig& m, std::string_view data) {
  json j = {{"lr", t.learning_rate},      {"epochs", t.max_epochs},       {"batch", t.batch_size},
            {"wd", t.weight_decay},       {"betas", {t.beta1, t.beta2}},  {"eps", t.adam_epsilon},
            {"seed", t.seed},             {"variant", to_string(t.variant)}, {"lm", m.lm_backend_id},
            {"hidden", m.hidden_size},    {"dv", m.imagery_dim},          {"max_tokens", m.max_tokens},
            {"threshold", m.threshold},   {"separator", m.prompt_template.separator},
            {"data", data}};
  return to_hex(sha256(j.dump()));
}

namespace {

json significance_json(const SignificanceResult& r) {
  return {{"t_statistic", r.t_statistic}, {"p_value", r.p_value}, {"n_pairs", r.n_pairs},
          {"degrees_of_freedom", r.degrees_of_freedom}, {"two_sided", r.two_sided}};
}

std::string percent(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * x);
  return buf;
}

std::string model_label(Variant v) {
  switch (v) {
    case Variant::kVanilla: return "Vanilla Baseline";
    case Variant::kDesc: return "+ Desc.";
    case Variant::kDescImag: return "+ Desc. + Imag.";
  }
  return "?";
}

}  // namespace

std::string significance_to_json(const SignificanceResult& r) { return significance_json(r).dump(2) + "\n"; }

std::string metrics_to_json(const MetricsArtifact& m) {
  const auto& r = m.result;
  json j = {{"name", m.name},
            {"lm_size", m.lm_size},
            {"variant", std::string(to_string(m.variant))},
            {"config_digest", r.config_digest},
            {"per_fold_f1", r.per_fold_f1},
            {"mean_f1", r.mean_f1},
            {"std_f1", r.std_f1},
            {"best_epochs", r.best_epochs},
            {"test",
             {{"ids", r.test_ids},
              {"per_fold_probs", r.per_fold_test_probs},
              {"ensemble_predictions", m.ensemble_predictions},
              {"f1", m.test_f1 ? json(*m.test_f1) : json(nullptr)}}},
            {"significance", m.significance ? significance_json(*m.significance) : json(nullptr)},
            {"significance_against", m.significance_against}};
  return j.dump(2) + "\n";
}

MetricsArtifact parse_metrics(std::string_view text) {
  try {
    auto j = json::parse(text);
    MetricsArtifact m;
    m.name = j.value("name", "");
    m.lm_size = j.value("lm_size", "");
    m.variant = parse_variant(j.at("variant").get<std::string>());
    auto& r = m.result;
    r.config_digest = j.value("config_digest", "");
    r.per_fold_f1 = j.at("per_fold_f1").get<std::vector<double>>();
    r.best_epochs = j.value("best_epochs", std::vector<int>{});
    summarize(r);
    if (auto it = j.find("test"); it != j.end() && it->is_object()) {
      r.test_ids = it->value("ids", std::vector<std::string>{});
      r.per_fold_test_probs = it->value("per_fold_probs", std::vector<std::vector<double>>{});
      m.ensemble_predictions = it->value("ensemble_predictions", std::vector<int>{});
      if (auto f = it->find("f1"); f != it->end() && f->is_number()) m.test_f1 = f->get<double>();
    }
    if (auto it = j.find("significance"); it != j.end() && it->is_object()) {
      SignificanceResult s;
      s.t_statistic = it->at("t_statistic").get<double>();
      s.p_value = it->at("p_value").get<double>();
      s.n_pairs = it->at("n_pairs").get<std::size_t>();
      s.degrees_of_freedom = it->value("degrees_of_freedom", static_cast<double>(s.n_pairs) - 1.0);
      s.two_sided = it->value("two_sided", true);
      m.significance = s;
    }
    m.significance_against = j.value("significance_against", "");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed metrics file: ") + e.what());
  }
}

std::string render_report(const std::vector<MetricsArtifact>& runs) {
  std::ostringstream out;
  out << "| Model | LM | validation | test |\n";
  out << "|---|---|---|---|\n";
  for (const auto& m : runs) {
    out << "| " << model_label(m.variant) << " | " << (m.lm_size.empty() ? "-" : m.lm_size) << " | "
        << percent(m.result.mean_f1) << " ± " << percent(m.result.std_f1) << " | "
        << (m.test_f1 ? percent(*m.test_f1) : std::string("-")) << " |\n";
  }
  for (const auto& m : runs) {
    if (!m.significance) continue;
    char buf[160];
    std::snprintf(buf, sizeof buf, "t = %.4f, p = %.4f (df = %.0f, two-sided)", m.significance->t_statistic,
                  m.significance->p_value, m.significance->degrees_of_freedom);
    out << "\nPaired t-test, " << (m.name.empty() ? std::string(to_string(m.variant)) : m.name);
    if (!m.significance_against.empty()) out << " vs " << m.significance_against;
    out << ": " << buf << "\n";
  }
  return out.str();
}

}  // namespace euph
