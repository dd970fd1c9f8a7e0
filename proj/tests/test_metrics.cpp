#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mtslam/data.hpp"
#include "mtslam/metrics.hpp"
#include "mtslam/rng.hpp"

using namespace mtslam;

namespace {

// O(n^2) all-pairs oracle with ties counted 1/2.
double auc_all_pairs(const ScoredLabels& s) {
  double num = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s.labels[i] != 1) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (s.labels[j] != 0) continue;
      ++pairs;
      if (s.scores[i] > s.scores[j])
        num += 1.0;
      else if (s.scores[i] == s.scores[j])
        num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

ScoredLabels random_scored(Rng& rng, int n, double pos_rate, bool heavy_ties) {
  ScoredLabels s;
  bool has0 = false, has1 = false;
  for (int i = 0; i < n; ++i) {
    double score = heavy_ties ? std::floor(rng.uniform() * 8.0) / 8.0 : rng.uniform();
    int label = rng.bernoulli(pos_rate) ? 1 : 0;
    if (i == n - 2 && !has1) label = 1;
    if (i == n - 1 && !has0) label = 0;
    has0 |= label == 0;
    has1 |= label == 1;
    s.push(score, label);
  }
  return s;
}

}  // namespace

TEST_CASE("worked AUC example") {
  ScoredLabels s;
  s.scores = {0.9, 0.8, 0.3, 0.2};
  s.labels = {1, 0, 1, 0};
  CHECK(auc(s) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("perfect separation gives AUC 1, all-equal scores give 0.5") {
  ScoredLabels perfect;
  perfect.scores = {0.9, 0.8, 0.2, 0.1};
  perfect.labels = {1, 1, 0, 0};
  CHECK(auc(perfect) == doctest::Approx(1.0));

  ScoredLabels ties;
  ties.scores = {0.4, 0.4, 0.4, 0.4};
  ties.labels = {1, 0, 1, 0};
  CHECK(auc(ties) == doctest::Approx(0.5));
}

TEST_CASE("single-class input is a metric-undefined error") {
  ScoredLabels s;
  s.scores = {0.5, 0.6};
  s.labels = {1, 1};
  CHECK_THROWS_AS(auc(s), InputError);
}

TEST_CASE("rank-based AUC equals all-pairs counting within 1e-12 on 100 random instances") {
  Rng rng(20260810);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = rng.range_int(2, 500);
    const double pos_rate = rep % 3 == 0 ? 0.05 : (rep % 3 == 1 ? 0.5 : 0.9);
    const bool heavy_ties = rep % 2 == 0;
    ScoredLabels s = random_scored(rng, n, pos_rate, heavy_ties);
    CHECK(std::abs(auc(s) - auc_all_pairs(s)) < 1e-12);
  }
}

TEST_CASE("AUC is invariant under strictly increasing transforms") {
  Rng rng(5);
  ScoredLabels s = random_scored(rng, 300, 0.3, false);
  const double base = auc(s);
  ScoredLabels t = s;
  for (double& x : t.scores) x = std::exp(3.0 * x) + 7.0;
  CHECK(auc(t) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("complement symmetry: auc(s, y) + auc(s, 1-y) == 1") {
  Rng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    ScoredLabels s = random_scored(rng, 200, 0.4, rep % 2 == 0);
    ScoredLabels flipped = s;
    for (int& y : flipped.labels) y = 1 - y;
    CHECK(auc(s) + auc(flipped) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("worked F1 example at threshold 0.5") {
  ScoredLabels s;
  s.scores = {0.9, 0.8, 0.3, 0.2};
  s.labels = {1, 0, 1, 0};
  F1Result r = f1_at(s, 0.5);
  CHECK(r.precision == doctest::Approx(0.5));
  CHECK(r.recall == doctest::Approx(0.5));
  CHECK(r.f1 == doctest::Approx(0.5));
}

TEST_CASE("perfect predictions give F1 1; empty positive predictions give F1 0") {
  ScoredLabels s;
  s.scores = {0.9, 0.8, 0.2, 0.1};
  s.labels = {1, 1, 0, 0};
  CHECK(f1_at(s, 0.5).f1 == doctest::Approx(1.0));
  CHECK(f1_at(s, 1.1).f1 == 0.0);
  CHECK(f1_at(s, 1.1).precision == 0.0);
}

TEST_CASE("raising the threshold weakly decreases recall, f1 stays in [0,1]") {
  Rng rng(7);
  ScoredLabels s = random_scored(rng, 400, 0.25, true);
  double last_recall = 1.0;
  for (double thr = 0.0; thr <= 1.01; thr += 0.05) {
    F1Result r = f1_at(s, thr);
    CHECK(r.recall <= last_recall + 1e-12);
    CHECK(r.f1 >= 0.0);
    CHECK(r.f1 <= 1.0);
    last_recall = r.recall;
  }
}

TEST_CASE("best_f1_threshold: perfect separation returns the lowest maximizing threshold") {
  ScoredLabels s;
  s.scores = {0.8, 0.9, 0.1, 0.2};
  s.labels = {1, 1, 0, 0};
  CHECK(best_f1_threshold(s) == doctest::Approx(0.8));
}

TEST_CASE("best_f1_threshold dominates the fixed 0.5 threshold and matches a brute scan") {
  Rng rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    ScoredLabels s = random_scored(rng, 120, 0.3, rep % 2 == 0);
    const double thr = best_f1_threshold(s);
    CHECK(f1_at(s, thr).f1 >= f1_at(s, 0.5).f1 - 1e-12);

    // exhaustive scan over observed scores
    double best = -1.0, best_thr = 0.0;
    std::vector<double> cand = s.scores;
    std::sort(cand.begin(), cand.end());
    for (double c : cand) {
      const double f = f1_at(s, c).f1;
      if (f > best) {
        best = f;
        best_thr = c;
      }
    }
    CHECK(thr == doctest::Approx(best_thr));
    CHECK(f1_at(s, thr).f1 == doctest::Approx(best));
  }
}

TEST_CASE("best_f1_threshold rejects single-class input") {
  ScoredLabels s;
  s.scores = {0.1, 0.2};
  s.labels = {0, 0};
  CHECK_THROWS_AS(best_f1_threshold(s), InputError);
}

TEST_CASE("frequency baseline: backoff to global for unseen, high score for always-wrong words") {
  auto mk = [](const std::string& id, const std::string& word, Format f, int label) {
    Exercise ex;
    ex.id = id;
    ex.meta.user = "u";
    ex.meta.countries = {"US"};
    ex.meta.format = f;
    Token t;
    t.instance_id = id + "t1";
    t.surface = word;
    t.pos = "X";
    t.morph = "_";
    t.dep_label = "root";
    ex.tokens.push_back(t);
    ex.labels = std::vector<int>{label};
    return ex;
  };
  Dataset train;
  train.language_tag = "aa_bb";
  for (int i = 0; i < 10; ++i)
    train.exercises.push_back(mk("w" + std::to_string(i), "wrong", Format::listen, 1));
  for (int i = 0; i < 10; ++i)
    train.exercises.push_back(mk("r" + std::to_string(i), "right", Format::listen, 0));

  Dataset eval_set;
  eval_set.language_tag = "aa_bb";
  eval_set.exercises.push_back(mk("e1", "wrong", Format::listen, 1));
  eval_set.exercises.push_back(mk("e2", "right", Format::listen, 0));
  eval_set.exercises.push_back(mk("e3", "unseen", Format::listen, 0));
  eval_set.exercises.push_back(mk("e4", "wrong", Format::reverse_tap, 1));  // word-only backoff

  ScoredLabels s = frequency_baseline({train}, eval_set);
  REQUIRE(s.size() == 4);
  CHECK(s.scores[0] == doctest::Approx(11.0 / 12.0));  // add-1 smoothed
  CHECK(s.scores[1] == doctest::Approx(1.0 / 12.0));
  CHECK(s.scores[2] == doctest::Approx(11.0 / 22.0));  // global rate
  CHECK(s.scores[3] == doctest::Approx(11.0 / 12.0));  // backs off to the word
  CHECK(s.scores[0] > 0.8);
}
