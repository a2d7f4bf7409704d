#include <doctest.h>

#include <cmath>

#include "euph/error.hpp"
#include "euph/experiments.hpp"
#include "euph/synthetic.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace euph;

namespace {

// Settings that let the tiny backend fit the separable toy quickly; the
// 5e-6 reference rate is meant for large pretrained backends.
TrainConfig toy_train(Variant v) {
  TrainConfig t;
  t.variant = v;
  t.learning_rate = 3e-3;
  t.max_epochs = 50;
  t.seed = 1;
  return t;
}

ClassifierConfig toy_model(Variant v) {
  ClassifierConfig c;
  c.variant = v;
  c.hidden_size = 16;
  c.imagery_dim = 8;
  return c;
}

ImageryTable toy_imagery(const Lexicon& lex) {
  ImageryTable t;
  int i = 0;
  for (const auto& e : lex.entries()) {
    ++i;
    t.emplace(e.pet_id, ImageryPair{Eigen::VectorXd::Constant(8, 0.1 * i), Eigen::VectorXd::Constant(8, -0.1 * i)});
  }
  return t;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("desc variant overfits the separable toy within 50 epochs") {
    const auto toy = make_separable_toy(32, 0);
    const auto folds = make_folds(toy.examples, 4, 0);
    const auto r = train_fold(toy_train(Variant::kDesc), toy_model(Variant::kDesc), folds[0], toy.examples,
                              toy.lexicon, nullptr, 512);
    CHECK(r.best_val_f1 == 1.0);
    CHECK(r.best_epoch >= 1);
    CHECK(r.best_epoch <= 50);
    CHECK(r.log.size() == 50);
  }

  TEST_CASE("desc_imag trains through the projection") {
    const auto toy = make_separable_toy(32, 0);
    const auto table = toy_imagery(toy.lexicon);
    const auto folds = make_folds(toy.examples, 4, 0);
    auto train = toy_train(Variant::kDescImag);
    const auto r = train_fold(train, toy_model(Variant::kDescImag), folds[1], toy.examples, toy.lexicon, &table, 512);
    CHECK(r.best_val_f1 == 1.0);
    const auto init = Projection::random(8, 16, 0);
    CHECK(r.best.projection().weight.rows() == 8);
    CHECK(r.best.projection().weight != init.weight);
  }

  TEST_CASE("one epoch takes ceil(|train| / 16) optimizer steps") {
    const auto toy = make_separable_toy(40, 0);
    const auto folds = make_folds(toy.examples, 4, 0);
    auto t = toy_train(Variant::kDesc);
    t.max_epochs = 1;
    const auto r = train_fold(t, toy_model(Variant::kDesc), folds[0], toy.examples, toy.lexicon, nullptr, 512);
    REQUIRE(r.log.size() == 1);
    CHECK(folds[0].train_ids.size() == 30);
    CHECK(r.log[0].optimizer_steps == 2);
  }

  TEST_CASE("same seed, same result") {
    const auto toy = make_separable_toy(32, 3);
    const auto folds = make_folds(toy.examples, 4, 3);
    auto t = toy_train(Variant::kDesc);
    t.max_epochs = 5;
    const auto a = train_fold(t, toy_model(Variant::kDesc), folds[2], toy.examples, toy.lexicon, nullptr, 512);
    const auto b = train_fold(t, toy_model(Variant::kDesc), folds[2], toy.examples, toy.lexicon, nullptr, 512);
    CHECK(a.best_val_f1 == b.best_val_f1);
    CHECK(a.best_epoch == b.best_epoch);
    for (std::size_t e = 0; e < a.log.size(); ++e) CHECK(a.log[e].train_loss == b.log[e].train_loss);
    CHECK(predict_probabilities(a.best, toy.examples, toy.lexicon, nullptr) ==
          predict_probabilities(b.best, toy.examples, toy.lexicon, nullptr));
  }

  TEST_CASE("divergence is reported with the epoch") {
    const auto toy = make_separable_toy(32, 0);
    const auto folds = make_folds(toy.examples, 4, 0);
    auto t = toy_train(Variant::kDesc);
    t.learning_rate = 1e308;
    t.weight_decay = 1.0;
    try {
      train_fold(t, toy_model(Variant::kDesc), folds[0], toy.examples, toy.lexicon, nullptr, 512);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }

  TEST_CASE("cross-validation is independent of the number of jobs") {
    const auto toy = make_separable_toy(32, 1);
    const auto folds = make_folds(toy.examples, 4, 1);
    auto t = toy_train(Variant::kDesc);
    t.max_epochs = 3;
    t.n_folds = 4;
    std::vector<Example> test(toy.examples.begin(), toy.examples.begin() + 5);
    std::vector<int> order;
    CvOptions serial;
    serial.buckets = 512;
    serial.on_fold = [&](const Fold& f, FoldResult&) { order.push_back(f.index); };
    CvOptions parallel = serial;
    parallel.jobs = 3;
    parallel.on_fold = nullptr;
    const auto a = run_cv(t, toy_model(Variant::kDesc), folds, toy.examples, toy.lexicon, nullptr, &test, serial);
    const auto b = run_cv(t, toy_model(Variant::kDesc), folds, toy.examples, toy.lexicon, nullptr, &test, parallel);
    CHECK(order == std::vector<int>{0, 1, 2, 3});
    CHECK(a.per_fold_f1 == b.per_fold_f1);
    CHECK(a.per_fold_test_probs == b.per_fold_test_probs);
    CHECK(a.per_fold_test_probs.size() == 4);
    CHECK(a.per_fold_test_probs[0].size() == 5);
    CHECK(a.test_ids.front() == test.front().id);
    CHECK(a.config_digest.size() == 64);
  }

  TEST_CASE("fold errors name the fold") {
    const auto toy = make_separable_toy(32, 0);
    auto folds = make_folds(toy.examples, 4, 0);
    folds[2].val_ids.push_back("no-such-id");
    auto t = toy_train(Variant::kDesc);
    t.max_epochs = 1;
    try {
      run_cv(t, toy_model(Variant::kDesc), folds, toy.examples, toy.lexicon, nullptr, nullptr, {1, 512, nullptr});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).rfind("fold 2: ", 0) == 0);
    }
  }

  TEST_CASE("summaries of fold scores") {
    RunResult r;
    r.per_fold_f1 = {0.9, 0.9, 0.9, 0.9, 0.9};
    summarize(r);
    CHECK(r.mean_f1 == doctest::Approx(0.9));
    CHECK(r.std_f1 == doctest::Approx(0.0));
    r.per_fold_f1 = {0.88, 0.90, 0.92};
    summarize(r);
    CHECK(r.mean_f1 == doctest::Approx(0.90));
    CHECK(r.std_f1 == doctest::Approx(oracle::kStd3).epsilon(1e-12));
  }

  TEST_CASE("AdamW applies bias-corrected moments and decoupled decay") {
    std::vector<double> w = {1.0}, g = {0.5};
    AdamW opt(0.1, 0.9, 0.999, 1e-8, 0.01);
    opt.step({Parameter{"w", w.data(), g.data(), 1, 1}});
    // m_hat = 0.5, v_hat = 0.25 after one step.
    CHECK(w[0] == doctest::Approx(1.0 - 0.1 * (0.5 / (0.5 + 1e-8) + 0.01 * 1.0)).epsilon(1e-14));
    CHECK(opt.steps() == 1);
  }

  TEST_CASE("reference recipes") {
    const auto base = TrainConfig::reference_base(Variant::kDescImag);
    CHECK(base.learning_rate == 5e-6);
    CHECK(base.max_epochs == 50);
    CHECK(base.batch_size == 16);
    CHECK(base.n_folds == 5);
    CHECK(TrainConfig::reference_large(Variant::kDesc).learning_rate == 3e-6);
    TrainConfig bad;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
  }

  TEST_CASE("imagery table is cache-only and names the cache on a miss") {
    test::TempDir tmp;
    ImageryStore store(ImageryCache(tmp.path()), std::make_shared<StubTextToImage>(),
                       std::make_shared<StubVisualEncoder>(8), ImageryOptions{3, 0, false, 16});
    const auto toy = make_separable_toy(8, 0);
    try {
      load_imagery_table(toy.lexicon, store);
      FAIL("expected NotFound");
    } catch (const NotFound& e) {
      CHECK(std::string(e.what()).find(tmp.path().string()) != std::string::npos);
    }
    const auto built = build_imagery_table(toy.lexicon, store);
    const auto loaded = load_imagery_table(toy.lexicon, store);
    CHECK(built.size() == 4);
    for (const auto& [id, pair] : built) {
      CHECK(loaded.at(id).term == pair.term);
      CHECK(loaded.at(id).description == pair.description);
    }
    // late and senior citizen share a description, hence its imagery.
    CHECK(built.at("late").description == built.at("senior_citizen").description);
  }

  TEST_CASE("config digest tracks every setting") {
    const auto t = toy_train(Variant::kDesc);
    const auto m = toy_model(Variant::kDesc);
    auto t2 = t;
    t2.learning_rate *= 2;
    auto m2 = m;
    m2.prompt_template.separator = " | ";
    CHECK(config_digest(t, m, "d") == config_digest(t, m, "d"));
    CHECK(config_digest(t, m, "d") != config_digest(t2, m, "d"));
    CHECK(config_digest(t, m, "d") != config_digest(t, m2, "d"));
    CHECK(config_digest(t, m, "d") != config_digest(t, m, "e"));
  }

  TEST_CASE("metrics artifacts round-trip and render") {
    MetricsArtifact m;
    m.name = "desc_imag";
    m.lm_size = "large";
    m.variant = Variant::kDescImag;
    m.result.per_fold_f1 = {0.9, 0.91, 0.89, 0.92, 0.88};
    m.result.best_epochs = {3, 4, 5, 6, 7};
    summarize(m.result);
    m.ensemble_predictions = {1, 0, 1};
    m.test_f1 = 0.8716;
    m.significance = SignificanceResult{2.5, 0.032, 5, 4, true};
    m.significance_against = "desc";
    const auto back = parse_metrics(metrics_to_json(m));
    CHECK(back.name == m.name);
    CHECK(back.variant == m.variant);
    CHECK(back.result.per_fold_f1 == m.result.per_fold_f1);
    CHECK(back.ensemble_predictions == m.ensemble_predictions);
    CHECK(*back.test_f1 == 0.8716);
    CHECK(back.significance->p_value == 0.032);
    const auto md = render_report({back});
    CHECK(md.find("+ Desc. + Imag.") != std::string::npos);
    CHECK(md.find("| large |") != std::string::npos);
    CHECK(md.find("90.00 ± 1.58") != std::string::npos);
    CHECK(md.find("87.16") != std::string::npos);
    CHECK(md.find("p = 0.0320") != std::string::npos);
    CHECK_THROWS_AS(parse_metrics("{}"), DataError);
  }
}
