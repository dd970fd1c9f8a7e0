#include "mtslam/batch.hpp"

#include <numeric>

#include "mtslam/error.hpp"
#include "mtslam/rng.hpp"

namespace mtslam {

std::vector<MultiBatch> make_batches(const std::vector<std::vector<EncodedExercise>>& per_language,
                                     int quota, uint64_t seed, bool shuffle) {
  if (quota < 1) throw ContractError("make_batches: quota must be >= 1");
  const size_t n_langs = per_language.size();

  std::vector<std::vector<int>> order(n_langs);
  size_t n_batches = 0;
  for (size_t k = 0; k < n_langs; ++k) {
    order[k].resize(per_language[k].size());
    std::iota(order[k].begin(), order[k].end(), 0);
    if (shuffle) {
      Rng rng(mix64(seed, 0xb41cULL, k));
      rng.shuffle(order[k]);
    }
    n_batches = std::max(n_batches, (per_language[k].size() + static_cast<size_t>(quota) - 1) /
                                        static_cast<size_t>(quota));
  }

  std::vector<MultiBatch> out(n_batches);
  for (size_t b = 0; b < n_batches; ++b) {
    out[b].per_language.resize(n_langs);
    for (size_t k = 0; k < n_langs; ++k) {
      const size_t lo = b * static_cast<size_t>(quota);
      const size_t hi = std::min(per_language[k].size(), lo + static_cast<size_t>(quota));
      for (size_t i = lo; i < hi; ++i)
        out[b].per_language[k].push_back(per_language[k][static_cast<size_t>(order[k][i])]);
    }
  }
  return out;
}

}  // namespace mtslam
