#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mtslam/adam.hpp"
#include "mtslam/batch.hpp"
#include "mtslam/metrics.hpp"
#include "mtslam/model.hpp"

namespace mtslam {

struct TrainConfig {
  double lr = 0.001;
  int per_language_quota = 32;
  int max_epochs = 30;
  int patience = 3;
  double grad_clip_norm = 5.0;
  uint64_t seed = 0;
  double alpha = 0.5;  // echoed into the model's loss weight
  int eval_every = 1;  // epochs between dev evaluations

  void validate() const;
};

struct EpochRow {
  int epoch = 0;
  std::vector<double> train_loss;  // per language, Eq.-style mean over the epoch's tokens
  std::vector<double> dev_auc;     // per language (empty on non-eval epochs)
  std::vector<double> dev_f1;      // at threshold 0.5
  double mean_dev_auc = 0.0;
};

struct TrainHistory {
  std::vector<EpochRow> epochs;
  int best_epoch = -1;  // epoch with the highest mean dev AUC seen
};

// Optimizer and epoch counters; checkpointing them makes resumed training
// reproduce an uninterrupted run exactly.
struct TrainState {
  AdamState adam;
  int64_t global_step = 0;
  int next_epoch = 0;
};

struct TrainResult {
  MTLModel best_model;
  TrainHistory history;
  MTLModel final_model;
  TrainState state;
};

using EncodedSets = std::vector<std::vector<EncodedExercise>>;

// Multi-task training: per epoch, shuffled per-language MultiBatches, summed
// per-language weighted cross-entropy, global-norm clipping, one Adam step
// per batch; early stopping on mean dev AUC with the given patience. Pass
// `resume` to continue from a checkpointed TrainState.
TrainResult train(const MTLModel& model, const EncodedSets& train_sets,
                  const EncodedSets& dev_sets, const TrainConfig& cfg,
                  const TrainState* resume = nullptr);

// One optimizer step on a batch; exposed for the sharing-invariant tests.
// Returns the pre-clip gradient norm.
double train_step(MTLModel& model, const MultiBatch& batch, const TrainConfig& cfg,
                  TrainState& state, std::vector<Tensor>& grad_acc,
                  std::vector<double>* lang_term_sums = nullptr,
                  std::vector<int64_t>* lang_tokens = nullptr);

struct EvalResult {
  double auc = 0.0;
  double f1 = 0.0;  // at threshold 0.5
  int64_t n_tokens = 0;
};

// Pooled eval-mode scores and labels over every token, exercise order kept.
ScoredLabels score_dataset(const MTLModel& model, const std::vector<EncodedExercise>& data);

EvalResult evaluate(const MTLModel& model, const std::vector<EncodedExercise>& data);

// `<instance_id> <prob>` with six decimals, exercise order preserved.
void predict_to_file(const MTLModel& model, const std::vector<EncodedExercise>& data,
                     std::ostream& out);

// ---- checkpointing ----
// Versioned binary: magic "MTSL", format version, model config, language
// tags, vocabulary, named full-precision parameter blobs, optional optimizer
// state.

void save_checkpoint(const MTLModel& model, const TrainState* state, std::ostream& out);
void save_checkpoint_file(const MTLModel& model, const TrainState* state,
                          const std::string& path);

struct Checkpoint {
  MTLModel model;
  std::optional<TrainState> state;
};

Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint_file(const std::string& path);

}  // namespace mtslam
