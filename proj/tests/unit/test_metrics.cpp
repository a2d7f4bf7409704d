#include <doctest.h>

#include <algorithm>

#include "euph/error.hpp"
#include "euph/metrics.hpp"
#include "euph/random.hpp"
#include "oracles.hpp"

using namespace euph;

namespace {

// Counts by enumerating every pair; F1 via precision and recall.
double brute_f1(const std::vector<int>& pred, const std::vector<int>& gold) {
  int tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    tp += pred[i] == 1 && gold[i] == 1;
    fp += pred[i] == 1 && gold[i] == 0;
    fn += pred[i] == 0 && gold[i] == 1;
  }
  if (tp + fp == 0 || tp + fn == 0) return 0.0;
  const double p = static_cast<double>(tp) / (tp + fp);
  const double r = static_cast<double>(tp) / (tp + fn);
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("perfect predictions score 1") {
    const std::vector<int> y = {1, 0, 1, 1, 0};
    CHECK(f1(y, y) == 1.0);
  }

  TEST_CASE("TP=2, FP=1, FN=1") {
    const std::vector<int> pred = {1, 1, 1, 0, 0};
    const std::vector<int> gold = {1, 1, 0, 1, 0};
    const auto c = confusion(pred, gold);
    CHECK(c.tp == 2);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
    CHECK(c.tn == 1);
    CHECK(f1(pred, gold) == doctest::Approx(oracle::kF1_2_1_1).epsilon(1e-15));
  }

  TEST_CASE("zero conventions") {
    CHECK(f1(std::vector<int>{0, 0, 0}, std::vector<int>{1, 0, 1}) == 0.0);
    CHECK(f1(std::vector<int>{1, 1}, std::vector<int>{0, 0}) == 0.0);
    CHECK(f1(std::vector<int>{0, 0}, std::vector<int>{0, 0}) == 0.0);
    CHECK(f1(std::vector<int>{}, std::vector<int>{}) == 0.0);
  }

  TEST_CASE("input checks") {
    CHECK_THROWS_AS(f1(std::vector<int>{1}, std::vector<int>{1, 0}), UsageError);
    CHECK_THROWS_AS(f1(std::vector<int>{2}, std::vector<int>{1}), UsageError);
  }

  TEST_CASE("matches the brute-force oracle on random vectors") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto n = uniform_index(rng, 51);
      std::vector<int> pred(n), gold(n);
      for (auto& x : pred) x = static_cast<int>(uniform_index(rng, 2));
      for (auto& x : gold) x = static_cast<int>(uniform_index(rng, 2));
      CHECK(f1(pred, gold) == brute_f1(pred, gold));
    }
  }

  TEST_CASE("single fold ensemble is that fold thresholded") {
    const std::vector<std::vector<double>> rows = {{0.2, 0.5, 0.51, 0.49, 1.0}};
    CHECK(ensemble(rows) == std::vector<int>{0, 1, 1, 0, 1});
  }

  TEST_CASE("mean of [0.6, 0.7, 0.2] is 0.5 and labels positive") {
    const std::vector<std::vector<double>> rows = {{0.6}, {0.7}, {0.2}};
    CHECK(column_means(rows)[0] == doctest::Approx(0.5));
    CHECK(ensemble(rows) == std::vector<int>{1});
  }

  TEST_CASE("fold order does not matter") {
    Rng rng(5);
    std::vector<std::vector<double>> rows(5, std::vector<double>(40));
    for (auto& r : rows)
      for (auto& x : r) x = uniform01(rng);
    const auto ref = ensemble(rows);
    const auto ref_vote = ensemble(rows, 0.5, EnsembleRule::kMajorityVote);
    std::sort(rows.begin(), rows.end());
    do {
      CHECK(ensemble(rows) == ref);
      CHECK(ensemble(rows, 0.5, EnsembleRule::kMajorityVote) == ref_vote);
    } while (std::next_permutation(rows.begin(), rows.end()));
  }

  TEST_CASE("majority vote breaks ties towards the positive class") {
    const std::vector<std::vector<double>> rows = {{0.9, 0.1}, {0.1, 0.1}, {0.9, 0.9}, {0.1, 0.9}};
    CHECK(ensemble(rows, 0.5, EnsembleRule::kMajorityVote) == std::vector<int>{1, 1});
    // Mean and vote can disagree.
    const std::vector<std::vector<double>> skew = {{0.51}, {0.51}, {0.0}};
    CHECK(ensemble(skew) == std::vector<int>{0});
    CHECK(ensemble(skew, 0.5, EnsembleRule::kMajorityVote) == std::vector<int>{1});
  }

  TEST_CASE("ensemble input checks") {
    CHECK_THROWS_AS(ensemble({}), UsageError);
    CHECK_THROWS_AS(ensemble({{0.1, 0.2}, {0.3}}), UsageError);
    CHECK_THROWS_AS(ensemble({{1.5}}), UsageError);
  }
}
