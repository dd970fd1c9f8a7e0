#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtslam/data.hpp"

namespace mtslam {

// Latent linear-logit learner model: a user's ability is drawn once and
// shared by every language, so cross-language transfer exists by
// construction; per-word difficulty is i.i.d. within a language, format
// carries a small fixed effect, and practice lowers the mistake rate with
// log(1 + days).
struct SynthConfig {
  int n_languages = 3;
  int n_users = 250;
  int words_per_language = 120;
  int train_exercises = 4000;  // per language
  int dev_exercises = 800;
  int test_exercises = 1500;
  int tokens_min = 2;
  int tokens_max = 4;
  uint64_t seed = 1;

  std::array<double, 3> format_effects = {0.35, 0.0, -0.35};  // listen, translate, tap
  double practice_gain = 0.1;
  double noise_scale = 0.25;  // per-token logit noise

  // Cold-start block: users who train only in one auxiliary language and are
  // evaluated on held-out-vocabulary test rows of language 0.
  int cold_users = 0;
  int cold_aux_language = 1;
  int cold_aux_exercises = 1000;  // per cold user, appended to aux train
  int cold_test_exercises = 120;  // per cold user, appended to target test
  double heldout_word_fraction = 0.0;  // reserved words, only cold test rows use them

  void validate() const;
};

// Ground truth per generated token; split is 0=train, 1=dev, 2=test.
struct BookEntry {
  std::string instance_id;
  double true_prob = 0.0;
  int label = 0;
  int language = 0;
  int split = 0;
  std::string user;
};

struct SynthSplit {
  Dataset train;
  Dataset dev;
  Dataset test;
};

struct SynthOutput {
  std::vector<SynthSplit> languages;
  std::vector<BookEntry> bookkeeping;
  std::unordered_map<std::string, double> abilities;  // one value per user, all languages
  std::vector<std::string> cold_user_ids;
};

// The latent mistake probability (before label sampling).
double mistake_probability(double difficulty, double format_effect, double ability, double days,
                           double practice_gain, double noise = 0.0);

SynthOutput generate(const SynthConfig& config);

// AUC of the generator's true probabilities used as the scorer: an upper
// bound no trained model should exceed beyond sampling noise.
double bayes_auc(const std::vector<BookEntry>& entries);

// `<instance_id> <true_prob>` per line.
std::string serialize_bookkeeping(const std::vector<BookEntry>& entries);

}  // namespace mtslam
