#pragma once

#include <vector>

#include "mtslam/data.hpp"

namespace mtslam {

// Parallel score/label arrays; the positive class is y=1 (a mistake).
struct ScoredLabels {
  std::vector<double> scores;
  std::vector<int> labels;

  void push(double score, int label) {
    scores.push_back(score);
    labels.push_back(label);
  }
  size_t size() const { return scores.size(); }
};

// P(score(pos) > score(neg)) with ties counted 1/2, computed with average
// ranks in O(n log n). Requires at least one example of each class.
double auc(const ScoredLabels& scored);

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Predict positive iff score >= threshold. Precision is 0 when nothing is
// predicted positive; F1 is 0 when precision + recall is 0.
F1Result f1_at(const ScoredLabels& scored, double threshold);

// Scans the observed score values and returns the threshold maximizing F1;
// ties resolve to the lowest threshold.
double best_f1_threshold(const ScoredLabels& dev_scored);

// Historical mistake rate of (lowercased word, format) with add-1 smoothing,
// backing off to the word alone and then to the global rate. A sanity floor
// for the learned models, not a contender.
ScoredLabels frequency_baseline(const std::vector<Dataset>& train_sets, const Dataset& eval_set);

}  // namespace mtslam
