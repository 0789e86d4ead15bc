#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "crimegat/errors.hpp"
#include "crimegat/metrics.hpp"
#include "crimegat/rng.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace crimegat;

namespace {

// O(P*N) pairwise oracle for the rank statistic.
double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++count;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(count);
}

}  // namespace

TEST_CASE("confusion_at_threshold hand cases") {
  {
    const std::vector<double> scores = {0.9, 0.1};
    const std::vector<int> labels = {1, 0};
    const auto m = confusion_at_threshold(scores, labels, 0.5);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
  }
  {
    const std::vector<double> scores = {0.1, 0.2};
    const std::vector<int> labels = {1, 0};
    const auto m = confusion_at_threshold(scores, labels, 0.5);
    CHECK(m.precision == 0.0);  // zero-denominator convention
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);
  }
  {
    const std::vector<double> scores = {0.9, 0.8, 0.4};
    const std::vector<int> labels = {1, 0, 1};
    const auto m = confusion_at_threshold(scores, labels, 0.5);
    CHECK(m.counts.tp == 1);
    CHECK(m.counts.fp == 1);
    CHECK(m.counts.fn == 1);
    CHECK(m.counts.tn == 0);
    CHECK(m.precision == 0.5);
    CHECK(m.recall == 0.5);
    CHECK(m.f1 == 0.5);
  }
}

TEST_CASE("confusion counts always total the input size") {
  Rng rng(7);
  for (int it = 0; it < 20; ++it) {
    const std::size_t n = 1 + rng.index(40);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.uniform();
      labels[i] = rng.uniform() < 0.5 ? 0 : 1;
    }
    const auto m = confusion_at_threshold(scores, labels, rng.uniform());
    CHECK(m.counts.total() == n);
  }
}

TEST_CASE("auc_roc hand cases") {
  {
    const std::vector<double> scores = {0.9, 0.8, 0.2, 0.1};
    const std::vector<int> labels = {1, 1, 0, 0};
    CHECK(auc_roc(scores, labels) == 1.0);
  }
  {
    const std::vector<double> scores = {0.5, 0.5, 0.5};
    const std::vector<int> labels = {1, 0, 1};
    CHECK(auc_roc(scores, labels) == 0.5);
  }
  {
    const std::vector<double> scores = {0.8, 0.6, 0.4, 0.2};
    const std::vector<int> labels = {1, 0, 1, 0};
    CHECK(auc_roc(scores, labels) == doctest::Approx(0.75).epsilon(1e-15));
  }
  const std::vector<double> one = {0.1, 0.2};
  const std::vector<int> single_class = {1, 1};
  CHECK_THROWS_AS((void)auc_roc(one, single_class), ContractError);
}

TEST_CASE("rank-based auc equals the pairwise oracle, ties included") {
  Rng rng(13);
  for (int it = 0; it < 200; ++it) {
    const std::size_t n = 2 + rng.index(40);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      // Half the instances use a coarse grid so ties actually occur.
      scores[i] = it % 2 == 0 ? rng.uniform()
                              : static_cast<double>(rng.index(5)) / 4.0;
      labels[i] = rng.uniform() < 0.5 ? 0 : 1;
      (labels[i] == 1 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;
    CHECK(std::abs(auc_roc(scores, labels) - brute_force_auc(scores, labels)) < 1e-12);
  }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
  Rng rng(19);
  std::vector<double> scores(30);
  std::vector<int> labels(30);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = static_cast<double>(rng.index(8));  // coarse: ties present
    labels[i] = i % 2 == 0 ? 1 : 0;
  }
  std::vector<double> transformed = scores;
  for (double& s : transformed) s = s * s * s + 2.0 * s + 1.0;  // strictly increasing
  CHECK(auc_roc(scores, labels) == auc_roc(transformed, labels));

  // Without ties, negating the scores flips the statistic around 0.5.
  std::vector<double> distinct(20);
  std::vector<int> dl(20);
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    distinct[i] = static_cast<double>(i) + rng.uniform() * 0.5;
    dl[i] = rng.uniform() < 0.5 ? 0 : 1;
  }
  dl[0] = 1;
  dl[1] = 0;
  std::vector<double> negated = distinct;
  for (double& s : negated) s = -s;
  CHECK(std::abs(auc_roc(distinct, dl) + auc_roc(negated, dl) - 1.0) < 1e-12);
}

TEST_CASE("select_threshold maximizes validation F1") {
  {
    // Perfect separation: the returned threshold classifies perfectly.
    const std::vector<double> scores = {0.9, 0.8, 0.2, 0.1};
    const std::vector<int> labels = {1, 1, 0, 0};
    const double t = select_threshold(scores, labels);
    const auto m = confusion_at_threshold(scores, labels, t);
    CHECK(m.f1 == 1.0);
    CHECK(t > 0.2);
    CHECK(t < 0.8);
  }
  {
    const std::vector<double> scores = {0.9, 0.8};
    const std::vector<int> labels = {1, 1};
    CHECK_THROWS_AS((void)select_threshold(scores, labels), ContractError);
  }
  {
    // Predicting everything positive (F1 = 0.8) beats any higher cut.
    const std::vector<double> scores = {0.9, 0.8, 0.4};
    const std::vector<int> labels = {1, 0, 1};
    const double t = select_threshold(scores, labels);
    CHECK(t < 0.4);
    CHECK(confusion_at_threshold(scores, labels, t).f1 == doctest::Approx(0.8));
  }
}

TEST_CASE("metrics table renders the comparison column order") {
  MetricsReport r;
  r.method = "crimegat";
  r.split = "test";
  r.precision = 0.84;
  r.recall = 0.82;
  r.f1 = 0.83;
  r.auc_roc = 0.87;
  const std::vector<MetricsReport> rows = {r};
  const std::string table = render_metrics_table(rows);
  const auto p = table.find("Precision");
  const auto rc = table.find("Recall");
  const auto f = table.find("F1-Score");
  const auto a = table.find("AUC-ROC");
  CHECK(p != std::string::npos);
  CHECK(p < rc);
  CHECK(rc < f);
  CHECK(f < a);
  CHECK(table.find("0.8400") != std::string::npos);

  const std::string jsonl = metrics_to_jsonl(rows);
  CHECK(jsonl.find("\"method\":\"crimegat\"") != std::string::npos);
  CHECK(jsonl.find("\"auc_roc\":0.87") != std::string::npos);
}
