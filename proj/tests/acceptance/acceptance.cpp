// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "euph/classifier.hpp"
#include "euph/corpus.hpp"
#include "euph/error.hpp"
#include "euph/experiments.hpp"
#include "euph/imagery.hpp"
#include "euph/io.hpp"
#include "euph/metrics.hpp"
#include "euph/random.hpp"
#include "euph/stats.hpp"
#include "euph/synthetic.hpp"
#include "helpers.hpp"

using namespace euph;

namespace {

struct Failure {
  std::string why;
};

void expect(bool ok, const std::string& why) {
  if (!ok) throw Failure{why};
}

// --- F1 --------------------------------------------------------------------

void f1_oracle() {
  Rng rng(1000);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = uniform_index(rng, 51);
    std::vector<int> p(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<int>(uniform_index(rng, 2));
      y[i] = static_cast<int>(uniform_index(rng, 2));
    }
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tp += p[i] && y[i];
      fp += p[i] && !y[i];
      fn += !p[i] && y[i];
    }
    const double prec = tp + fp ? double(tp) / (tp + fp) : 0.0;
    const double rec = tp + fn ? double(tp) / (tp + fn) : 0.0;
    const double expected = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    expect(std::abs(f1(p, y) - expected) < 1e-12, "mismatch on trial " + std::to_string(trial));
  }
}

// --- paired t-test -----------------------------------------------------------

void paired_t() {
  const std::vector<double> a = {1, 2, 3}, b = {0, 0, 0};
  const auto r = paired_t_test(a, b);
  expect(std::abs(r.t_statistic - 3.4641) <= 1e-4, "t = " + std::to_string(r.t_statistic));
  expect(std::abs(r.p_value - 0.0742) <= 1e-4, "p = " + std::to_string(r.p_value));
  expect(r.degrees_of_freedom == 2, "df");
  bool raised = false;
  try {
    paired_t_test(a, a);
  } catch (const NumericError&) {
    raised = true;
  }
  expect(raised, "identical samples did not raise");
}

// --- imagery averaging -------------------------------------------------------

class TableEncoder final : public VisualEncoder {
 public:
  explicit TableEncoder(std::vector<Eigen::VectorXd> t) : t_(std::move(t)) {}
  std::string id() const override { return "table"; }
  std::size_t dim() const override { return static_cast<std::size_t>(t_.front().size()); }
  Eigen::VectorXd encode(const Image& img) override { return t_.at(img.rgb[0]); }

 private:
  std::vector<Eigen::VectorXd> t_;
};

ImagerySet set_of(const std::vector<int>& idx) {
  ImagerySet s{"text", 0, {}, "table"};
  for (int i : idx) s.images.push_back(Image::solid(1, 1, static_cast<std::uint8_t>(i), 0, 0));
  return s;
}

void imagery_average() {
  Rng rng(7);
  std::vector<Eigen::VectorXd> table;
  for (int i = 0; i < 9; ++i) {
    Eigen::VectorXd v(64);
    for (auto& x : v) x = uniform(rng, -10.0, 10.0);
    table.push_back(v);
  }
  TableEncoder enc(table);
  std::vector<int> order(9);
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd ref = embed_imagery(set_of(order), enc).vector;
  for (int t = 0; t < 100; ++t) {
    shuffle(order, rng);
    expect(embed_imagery(set_of(order), enc).vector == ref, "permutation changed the mean");
  }
  expect(embed_imagery(set_of({4}), enc).vector == table[4], "K=1 is not the identity");
  std::vector<int> twice = order;
  twice.insert(twice.end(), order.begin(), order.end());
  expect((embed_imagery(set_of(twice), enc).vector - ref).cwiseAbs().maxCoeff() <= 1e-12, "duplication");
  for (Eigen::Index d = 0; d < ref.size(); ++d) {
    long double sum = 0;
    for (const auto& v : table) sum += v[d];
    const double oracle = static_cast<double>(sum / 9);
    expect(std::abs(ref[d] - oracle) <= 1e-12 * std::max(1.0, std::abs(oracle)), "summation oracle");
  }
}

// --- projection gradient -----------------------------------------------------

void projection_gradient() {
  ClassifierConfig cfg;
  cfg.variant = Variant::kDescImag;
  cfg.hidden_size = 16;
  cfg.imagery_dim = 8;
  Classifier model(cfg, make_language_model(cfg, 512));
  Rng rng(3);
  for (auto& b : model.projection().bias) b = uniform(rng, -0.1, 0.1);
  Example ex;
  ex.id = "g";
  ex.context = ex.sentence = "They said he had passed on last spring .";
  ex.pet_id = "pass_on";
  const auto prompt = build_prompt(PromptVariant::kDescribed, {"pass_on", "pass on", "death, dying", {}}, ex);
  ImageryPair img{Eigen::VectorXd(8), Eigen::VectorXd(8)};
  for (auto& x : img.term) x = uniform(rng, -1.0, 1.0);
  for (auto& x : img.description) x = uniform(rng, -1.0, 1.0);

  for (int label : {0, 1}) {
    model.zero_grad();
    model.accumulate(prompt, img, label, 1.0);
    for (const auto& p : model.parameters()) {
      if (p.name.rfind("projection.", 0) != 0) continue;
      const std::vector<double> analytic(p.grad, p.grad + p.size());
      for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double h = 1e-6, saved = p.value[i];
        p.value[i] = saved + h;
        const double up = loss(model.predict(prompt, img).p_hat, label);
        p.value[i] = saved - h;
        const double down = loss(model.predict(prompt, img).p_hat, label);
        p.value[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double rel = std::abs(analytic[i] - numeric) / std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-7);
        expect(rel < 1e-4, p.name + "[" + std::to_string(i) + "] relative error " + std::to_string(rel));
      }
    }
  }
}

// --- toy overfit -------------------------------------------------------------

void toy_overfit() {
  const auto toy = make_separable_toy(32, 0);
  TrainConfig t;
  t.variant = Variant::kDesc;
  t.learning_rate = 3e-3;
  t.max_epochs = 50;
  t.seed = 1;
  ClassifierConfig m;
  m.variant = Variant::kDesc;
  m.hidden_size = 16;
  // Train and validate on all 32 examples.
  Fold all;
  for (const auto& e : toy.examples) {
    all.train_ids.push_back(e.id);
    all.val_ids.push_back(e.id);
  }
  const auto r = train_fold(t, m, all, toy.examples, toy.lexicon, nullptr, 512);
  expect(r.best_val_f1 == 1.0, "best F1 " + std::to_string(r.best_val_f1));
}

// --- determinism -------------------------------------------------------------

void cli(const std::vector<std::string>& args) {
  const auto r = test::run_cli(args);
  expect(r.code == 0, args.front() + " exited " + std::to_string(r.code) + ": " + r.err);
}

std::string pipeline_once() {
  test::TempDir tmp;
  const auto lex = test::lexicon_path();
  cli({"synth", "--lexicon", lex, "--out", tmp / "raw", "--labeled", "400", "--seed", "5"});
  cli({"prepare", "--data", tmp / "raw/labeled.jsonl", "--unlabeled", tmp / "raw/unlabeled.jsonl", "--lexicon", lex,
       "--out", tmp / "prep"});
  cli({"imagery", "--lexicon", lex, "--cache", tmp / "cache", "--encoder-dim", "16"});
  cli({"train", "--data", tmp / "prep/train.jsonl", "--folds", tmp / "prep/folds.json", "--lexicon", lex,
       "--variant", "desc_imag", "--cache", tmp / "cache", "--encoder-dim", "16", "--fold", "0", "--epochs", "2",
       "--hidden", "16", "--lr", "1e-3", "--out", tmp / "run"});
  cli({"predict", "--data", tmp / "prep/test.jsonl", "--lexicon", lex, "--cache", tmp / "cache", "--checkpoint",
       tmp / "run/checkpoints/desc_imag/fold-0", "--out", tmp / "pred.jsonl"});
  return read_file(tmp.path() / "pred.jsonl");
}

void determinism() {
  const auto a = pipeline_once();
  const auto b = pipeline_once();
  expect(!a.empty(), "empty predictions");
  expect(a == b, "prediction files differ");
}

// --- data contracts ----------------------------------------------------------

void data_contracts() {
  Rng rng(42);
  const std::vector<std::string> words = {"he", "was", "@", "@", ".", "!", "?", "The", "LATE", "\t", "  ", "so"};
  for (int i = 0; i < 100; ++i) {
    Example ex;
    ex.id = "f" + std::to_string(i);
    ex.term_surface = "late";
    std::string s;
    const auto n = 3 + uniform_index(rng, 20);
    for (std::uint64_t w = 0; w < n; ++w) s += (w == n / 2 ? "late " : "") + words[uniform_index(rng, words.size())] + " ";
    ex.context = ex.sentence = s;
    const auto once = preprocess(ex);
    expect(preprocess(once) == once, "preprocess not idempotent on: " + s);
  }
  const auto lex = load_lexicon(test::lexicon_path());
  expect(lex.size() == 131, "lexicon has " + std::to_string(lex.size()) + " PETs");
  const auto corpus = make_synthetic_corpus(lex);
  const auto folds = make_folds(preprocess_all(corpus.labeled), 5, 0);
  std::multiset<std::size_t> sizes;
  for (const auto& f : folds) sizes.insert(f.val_ids.size());
  expect(sizes == std::multiset<std::size_t>{315, 315, 315, 314, 314}, "fold sizes");
}

// --- ensemble ----------------------------------------------------------------

void ensemble_checks() {
  expect(ensemble({{0.6}, {0.7}, {0.2}}) == std::vector<int>{1}, "[0.6, 0.7, 0.2] did not give 1");
  Rng rng(11);
  std::vector<std::vector<double>> rows(5, std::vector<double>(40));
  for (auto& r : rows)
    for (auto& x : r) x = uniform01(rng);
  const auto ref = ensemble(rows);
  for (int t = 0; t < 50; ++t) {
    shuffle(rows, rng);
    expect(ensemble(rows) == ref, "row permutation changed the ensemble");
  }
}

}  // namespace

int main() {
  struct Check {
    const char* name;
    std::function<void()> run;
    double budget_s;  // 0: untimed
  };
  const std::vector<Check> checks = {
      {"f1-oracle", f1_oracle, 5},
      {"paired-t-test", paired_t, 0},
      {"imagery-averaging", imagery_average, 0},
      {"projection-gradient", projection_gradient, 30},
      {"toy-overfit", toy_overfit, 120},
      {"pipeline-determinism", determinism, 0},
      {"data-contracts", data_contracts, 0},
      {"ensemble", ensemble_checks, 0},
  };
  int failed = 0;
  for (const auto& c : checks) {
    const auto start = std::chrono::steady_clock::now();
    std::string why;
    try {
      c.run();
    } catch (const Failure& f) {
      why = f.why;
    } catch (const std::exception& e) {
      why = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (why.empty() && c.budget_s > 0 && secs >= c.budget_s) why = "took longer than the time budget";
    if (why.empty()) {
      std::printf("PASS %s (%.2fs)\n", c.name, secs);
    } else {
      ++failed;
      std::printf("FAIL %s (%.2fs): %s\n", c.name, secs, why.c_str());
    }
  }
  return failed ? 1 : 0;
}
