#include <benchmark/benchmark.h>

#include "euph/classifier.hpp"
#include "euph/imagery.hpp"
#include "euph/metrics.hpp"
#include "euph/random.hpp"

using namespace euph;

namespace {

void BM_Project(benchmark::State& state) {
  const auto dv = static_cast<std::size_t>(state.range(0));
  const auto p = Projection::random(dv, 1024, 0);
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(dv), -1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(project(v, p));
}
BENCHMARK(BM_Project)->Arg(512)->Arg(768);

void BM_EmbedImagery(benchmark::State& state) {
  StubTextToImage t2i;
  StubVisualEncoder enc(512);
  const auto set = generate_imagery("old person, elderly", static_cast<int>(state.range(0)), t2i, 0, nullptr);
  for (auto _ : state) benchmark::DoNotOptimize(embed_imagery(set, enc));
}
BENCHMARK(BM_EmbedImagery)->Arg(1)->Arg(9);

void BM_F1(benchmark::State& state) {
  Rng rng(1);
  std::vector<int> p(static_cast<std::size_t>(state.range(0))), y(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = static_cast<int>(uniform_index(rng, 2));
    y[i] = static_cast<int>(uniform_index(rng, 2));
  }
  for (auto _ : state) benchmark::DoNotOptimize(f1(p, y));
}
BENCHMARK(BM_F1)->Arg(394)->Arg(1 << 16);

void BM_PredictDescImag(benchmark::State& state) {
  ClassifierConfig cfg;
  cfg.variant = Variant::kDescImag;
  cfg.hidden_size = static_cast<std::size_t>(state.range(0));
  cfg.imagery_dim = 64;
  const Classifier model(cfg, make_language_model(cfg));
  Example ex;
  ex.id = "b";
  ex.context = ex.sentence = "My grandmother passed on last spring after a long illness .";
  ex.pet_id = "pass_on";
  const auto prompt = build_prompt(PromptVariant::kDescribed, {"pass_on", "pass on", "death, dying", {}}, ex);
  const std::optional<ImageryPair> img = ImageryPair{Eigen::VectorXd::Ones(64), Eigen::VectorXd::Zero(64)};
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(prompt, img));
}
BENCHMARK(BM_PredictDescImag)->Arg(32)->Arg(128);

}  // namespace
BENCHMARK_MAIN();
