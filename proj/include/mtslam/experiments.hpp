#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mtslam/kmeans.hpp"
#include "mtslam/model.hpp"
#include "mtslam/synth.hpp"
#include "mtslam/train.hpp"

namespace mtslam {

// Knobs for the scripted experiment drivers. Every run is reproducible from
// this struct alone: corpora come from synth.seed, training/init seeds are
// train.seed + seed index.
struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  SynthConfig synth;
  std::vector<int64_t> sizes = {500};  // low-resource grid of target train sizes
  int n_seeds = 5;
  int target_language = 0;
  int kmeans_k = 4;
  bool chrono_sampling = false;
  int min_count = 1;  // vocabulary threshold  // prefix sampling instead of uniform downsampling
};

struct ReportRow {
  std::string experiment;
  std::string condition;
  std::string language;
  uint64_t seed = 0;
  double auc = 0.0;
  double f1 = 0.0;  // at the dev-tuned threshold
  int64_t n_train = 0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
};

// CSV with RFC-4180 quoting; fixed column order
// experiment,condition,language,seed,auc,f1,n_train.
std::string emit_csv(const ExperimentReport& report);
ExperimentReport parse_report_csv(const std::string& text);

// ---- scripted runs ----

// Downsamples one target language's training set to each size; with mtl the
// other languages stay at full size, without it the model trains on the
// target alone. Evaluation always uses the untouched dev/test sets.
ExperimentReport run_low_resource(const ExperimentConfig& cfg, const SynthOutput& corpus,
                                  const std::vector<int64_t>& sizes, bool mtl);

// Both arms over the configured grid and seeds.
ExperimentReport low_resource_experiment(const ExperimentConfig& cfg);

// Removes the chosen users from the target language's train and dev sets,
// trains both arms, and evaluates only those users' target test rows.
ExperimentReport run_cold_start(const ExperimentConfig& cfg, const SynthOutput& corpus,
                                const std::vector<std::string>& user_ids);

ExperimentReport cold_start_experiment(const ExperimentConfig& cfg);

// One full training per arm over
// {full, -meta, -word, -char_lstm, -char_cnn, -both_char}.
ExperimentReport run_encoder_ablation(const ExperimentConfig& cfg);

// One full training per masked meta field.
ExperimentReport run_meta_feature_ablation(const ExperimentConfig& cfg);

// ---- user-embedding clustering ----

struct ClusterUserRow {
  std::string user;
  std::vector<double> embedding;
  std::array<double, 2> projection;
  int cluster = 0;
  double accuracy = 0.0;  // share of correctly answered tokens
};

struct ClusterReport {
  std::vector<ClusterUserRow> users;
  std::vector<double> cluster_accuracy;  // mean member accuracy per cluster
  std::vector<double> sse_trace;
};

// K-means over the trained user-embedding rows of every user that appears in
// the datasets with labeled tokens; 2-D coordinates come from PCA.
ClusterReport cluster_users(const MTLModel& model, const std::vector<Dataset>& datasets, int k,
                            uint64_t seed);

// `user_id v1 ... vd cluster acc` per line.
std::string export_embeddings(const ClusterReport& report);

// Per-user CSV with the 2-D projection, cluster id and accuracy, then one
// row per cluster with its mean accuracy.
std::string cluster_csv(const ClusterReport& report);

}  // namespace mtslam
