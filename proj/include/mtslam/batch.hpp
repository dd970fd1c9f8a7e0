#pragma once

#include <cstdint>
#include <vector>

#include "mtslam/vocab.hpp"

namespace mtslam {

// One multi-task mini-batch: up to `quota` exercises per language, each
// exercise filed under its own language only.
struct MultiBatch {
  std::vector<std::vector<EncodedExercise>> per_language;

  int total() const {
    int n = 0;
    for (const auto& v : per_language) n += static_cast<int>(v.size());
    return n;
  }
};

// Splits one epoch into MultiBatches: each language's exercises are shuffled
// (deterministically from `seed`) and dealt `quota` at a time; languages that
// run out earlier simply stop contributing. Every exercise appears exactly
// once per epoch.
std::vector<MultiBatch> make_batches(const std::vector<std::vector<EncodedExercise>>& per_language,
                                     int quota, uint64_t seed, bool shuffle);

}  // namespace mtslam
