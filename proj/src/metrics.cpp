#include "mtslam/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "mtslam/error.hpp"
#include "mtslam/vocab.hpp"

namespace mtslam {

double auc(const ScoredLabels& scored) {
  const size_t n = scored.size();
  if (n == 0 || scored.labels.size() != n)
    throw ContractError("auc: scores and labels must be parallel and non-empty");
  int64_t n_pos = 0;
  for (int y : scored.labels) n_pos += y;
  const int64_t n_neg = static_cast<int64_t>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw InputError("auc: undefined, only one class present");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return scored.scores[static_cast<size_t>(a)] < scored.scores[static_cast<size_t>(b)];
  });

  // Average ranks over tie groups, 1-based.
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scored.scores[static_cast<size_t>(order[j + 1])] ==
                            scored.scores[static_cast<size_t>(order[i])])
      ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k)
      if (scored.labels[static_cast<size_t>(order[k])] == 1) pos_rank_sum += avg_rank;
    i = j + 1;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

F1Result f1_at(const ScoredLabels& scored, double threshold) {
  int64_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < scored.size(); ++i) {
    const bool pred = scored.scores[i] >= threshold;
    const bool pos = scored.labels[i] == 1;
    if (pred && pos) ++tp;
    if (pred && !pos) ++fp;
    if (!pred && pos) ++fn;
  }
  F1Result r;
  r.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                                        : 0.0;
  return r;
}

double best_f1_threshold(const ScoredLabels& dev_scored) {
  if (dev_scored.size() == 0) throw InputError("best_f1_threshold: empty input");
  int64_t n_pos = 0;
  for (int y : dev_scored.labels) n_pos += y;
  if (n_pos == 0 || n_pos == static_cast<int64_t>(dev_scored.size()))
    throw InputError("best_f1_threshold: only one class present");

  std::vector<double> candidates = dev_scored.scores;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  double best_thr = candidates.front();
  double best_f1 = -1.0;
  for (double thr : candidates) {
    const double f = f1_at(dev_scored, thr).f1;
    if (f > best_f1) {
      best_f1 = f;
      best_thr = thr;
    }
  }
  return best_thr;
}

ScoredLabels frequency_baseline(const std::vector<Dataset>& train_sets, const Dataset& eval_set) {
  struct Counts {
    int64_t n = 0;
    int64_t wrong = 0;
  };
  std::unordered_map<std::string, Counts> by_word_format;
  std::unordered_map<std::string, Counts> by_word;
  int64_t total = 0, total_wrong = 0;

  for (const Dataset& ds : train_sets) {
    for (const Exercise& ex : ds.exercises) {
      if (!ex.labels) throw InputError("frequency_baseline: train data must be labeled");
      for (size_t t = 0; t < ex.tokens.size(); ++t) {
        const std::string w = lowercase_ascii(ex.tokens[t].surface);
        const int y = (*ex.labels)[t];
        auto& wf = by_word_format[w + "\x1f" + to_string(ex.meta.format)];
        ++wf.n;
        wf.wrong += y;
        auto& ww = by_word[w];
        ++ww.n;
        ww.wrong += y;
        ++total;
        total_wrong += y;
      }
    }
  }
  const double global = static_cast<double>(total_wrong + 1) / static_cast<double>(total + 2);

  ScoredLabels out;
  for (const Exercise& ex : eval_set.exercises) {
    for (size_t t = 0; t < ex.tokens.size(); ++t) {
      const std::string w = lowercase_ascii(ex.tokens[t].surface);
      double score = global;
      const auto wf = by_word_format.find(w + "\x1f" + to_string(ex.meta.format));
      if (wf != by_word_format.end()) {
        score = static_cast<double>(wf->second.wrong + 1) / static_cast<double>(wf->second.n + 2);
      } else {
        const auto ww = by_word.find(w);
        if (ww != by_word.end())
          score = static_cast<double>(ww->second.wrong + 1) / static_cast<double>(ww->second.n + 2);
      }
      out.push(score, ex.labels ? (*ex.labels)[t] : 0);
    }
  }
  return out;
}

}  // namespace mtslam
