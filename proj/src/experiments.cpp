#include "mtslam/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <unordered_map>
#include <unordered_set>

#include "mtslam/error.hpp"

namespace mtslam {

namespace {

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += "\"";
  return out;
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Chronological-prefix alternative to uniform downsampling.
Dataset take_prefix(const Dataset& ds, int64_t n) {
  if (n >= static_cast<int64_t>(ds.exercises.size())) return ds;
  Dataset out;
  out.language_tag = ds.language_tag;
  out.exercises.assign(ds.exercises.begin(), ds.exercises.begin() + n);
  return out;
}

struct ArmData {
  MTLModel model;
  EncodedSets train_sets;
  EncodedSets dev_sets;
  std::vector<EncodedExercise> target_dev;
  std::vector<EncodedExercise> target_test;
};

// Builds vocabulary from exactly the training data in use, encodes
// everything, and initializes a model.
ArmData prepare_arm(const ExperimentConfig& cfg, const std::vector<Dataset>& train,
                    const std::vector<Dataset>& dev, const Dataset& target_dev,
                    const Dataset& target_test, uint64_t model_seed) {
  ArmData arm;
  Vocabulary vocab = build_vocab(train, cfg.min_count);
  std::vector<std::string> tags;
  for (const Dataset& d : train) tags.push_back(d.language_tag);
  arm.model = init_model(cfg.model, vocab, tags, model_seed);
  for (size_t k = 0; k < train.size(); ++k) {
    arm.train_sets.push_back(encode_dataset(train[k], vocab, static_cast<int>(k)));
    arm.dev_sets.push_back(encode_dataset(dev[k], vocab, static_cast<int>(k)));
  }
  const int target_idx = arm.model.language_index(target_test.language_tag);
  arm.target_dev = encode_dataset(target_dev, vocab, target_idx);
  arm.target_test = encode_dataset(target_test, vocab, target_idx);
  return arm;
}

struct ArmScore {
  double auc = 0.0;
  double f1 = 0.0;
};

// Trains and scores the target test set; F1 uses the dev-tuned threshold.
ArmScore train_and_score(const ExperimentConfig& cfg, ArmData& arm, uint64_t seed,
                         const std::vector<EncodedExercise>* eval_override = nullptr) {
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  const TrainResult res = train(arm.model, arm.train_sets, arm.dev_sets, tc);
  const std::vector<EncodedExercise>& eval_set =
      eval_override ? *eval_override : arm.target_test;
  const ScoredLabels test_scored = score_dataset(res.best_model, eval_set);
  const ScoredLabels dev_scored = score_dataset(res.best_model, arm.target_dev);
  ArmScore s;
  s.auc = auc(test_scored);
  s.f1 = f1_at(test_scored, best_f1_threshold(dev_scored)).f1;
  return s;
}

}  // namespace

std::string emit_csv(const ExperimentReport& report) {
  std::string out = "experiment,condition,language,seed,auc,f1,n_train\n";
  for (const ReportRow& r : report.rows) {
    out += csv_quote(r.experiment) + "," + csv_quote(r.condition) + "," + csv_quote(r.language) +
           "," + std::to_string(r.seed) + "," + fmt6(r.auc) + "," + fmt6(r.f1) + "," +
           std::to_string(r.n_train) + "\n";
  }
  return out;
}

ExperimentReport parse_report_csv(const std::string& text) {
  ExperimentReport rep;
  size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    // split one record, honoring quoted fields
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    while (pos < text.size()) {
      const char c = text[pos];
      if (quoted) {
        if (c == '"' && pos + 1 < text.size() && text[pos + 1] == '"') {
          cur += '"';
          pos += 2;
          continue;
        }
        if (c == '"') {
          quoted = false;
          ++pos;
          continue;
        }
        cur += c;
        ++pos;
        continue;
      }
      if (c == '"') {
        quoted = true;
        ++pos;
        continue;
      }
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
        ++pos;
        continue;
      }
      if (c == '\n') {
        ++pos;
        break;
      }
      cur += c;
      ++pos;
    }
    fields.push_back(cur);
    if (header) {
      header = false;
      continue;
    }
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 7) throw ParseError("report csv: expected 7 columns");
    ReportRow r;
    r.experiment = fields[0];
    r.condition = fields[1];
    r.language = fields[2];
    r.seed = std::stoull(fields[3]);
    r.auc = std::stod(fields[4]);
    r.f1 = std::stod(fields[5]);
    r.n_train = std::stoll(fields[6]);
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

ExperimentReport run_low_resource(const ExperimentConfig& cfg, const SynthOutput& corpus,
                                  const std::vector<int64_t>& sizes, bool mtl) {
  const int target = cfg.target_language;
  if (target < 0 || target >= static_cast<int>(corpus.languages.size()))
    throw InputError("low-resource: target language out of range");
  ExperimentReport rep;
  for (int64_t size : sizes) {
    if (size < 1) throw InputError("low-resource: sizes must be positive");
    int64_t n = size;
    const int64_t avail =
        static_cast<int64_t>(corpus.languages[static_cast<size_t>(target)].train.exercises.size());
    if (n > avail) {
      std::cerr << "low-resource: size " << n << " exceeds available " << avail
                << " exercises, clamping\n";
      n = avail;
    }
    for (int s = 0; s < cfg.n_seeds; ++s) {
      const uint64_t seed = cfg.train.seed + static_cast<uint64_t>(s);
      const Dataset& full_target = corpus.languages[static_cast<size_t>(target)].train;
      const Dataset small = cfg.chrono_sampling
                                ? take_prefix(full_target, n)
                                : downsample(full_target, n, mix64(seed, static_cast<uint64_t>(n)));

      std::vector<Dataset> train_d, dev_d;
      if (mtl) {
        for (size_t k = 0; k < corpus.languages.size(); ++k) {
          train_d.push_back(static_cast<int>(k) == target ? small : corpus.languages[k].train);
          dev_d.push_back(corpus.languages[k].dev);
        }
      } else {
        train_d.push_back(small);
        dev_d.push_back(corpus.languages[static_cast<size_t>(target)].dev);
      }
      ArmData arm = prepare_arm(cfg, train_d, dev_d,
                                corpus.languages[static_cast<size_t>(target)].dev,
                                corpus.languages[static_cast<size_t>(target)].test, seed);
      const ArmScore score = train_and_score(cfg, arm, seed);
      rep.rows.push_back(ReportRow{"low-resource",
                                   "size=" + std::to_string(size) + (mtl ? "/mtl" : "/single"),
                                   full_target.language_tag, seed, score.auc, score.f1, n});
    }
  }
  return rep;
}

ExperimentReport low_resource_experiment(const ExperimentConfig& cfg) {
  const SynthOutput corpus = generate(cfg.synth);
  ExperimentReport rep = run_low_resource(cfg, corpus, cfg.sizes, true);
  const ExperimentReport single = run_low_resource(cfg, corpus, cfg.sizes, false);
  rep.rows.insert(rep.rows.end(), single.rows.begin(), single.rows.end());
  return rep;
}

ExperimentReport run_cold_start(const ExperimentConfig& cfg, const SynthOutput& corpus,
                                const std::vector<std::string>& user_ids) {
  const int target = cfg.target_language;
  if (user_ids.empty()) throw InputError("cold-start: no users given");

  // Users must exist in the target test set and in at least two languages.
  std::unordered_set<std::string> wanted(user_ids.begin(), user_ids.end());
  for (const std::string& u : user_ids) {
    int langs_with_data = 0;
    for (const auto& lang : corpus.languages) {
      bool seen = false;
      for (const Dataset* ds : {&lang.train, &lang.dev, &lang.test})
        for (const Exercise& ex : ds->exercises)
          if (ex.meta.user == u) {
            seen = true;
            break;
          }
      if (seen) ++langs_with_data;
    }
    if (langs_with_data < 2)
      throw InputError("cold-start: user " + u + " has data in fewer than two languages");
    bool in_test = false;
    for (const Exercise& ex : corpus.languages[static_cast<size_t>(target)].test.exercises)
      if (ex.meta.user == u) in_test = true;
    if (!in_test) throw InputError("cold-start: user " + u + " absent from the target test set");
  }

  // Remove the users from the target language's train and dev sets.
  Dataset target_train = corpus.languages[static_cast<size_t>(target)].train;
  Dataset target_dev = corpus.languages[static_cast<size_t>(target)].dev;
  for (const std::string& u : user_ids) {
    target_train = remove_user(target_train, u);
    target_dev = remove_user(target_dev, u);
  }

  // Their target test rows are the evaluation set.
  Dataset cold_test;
  cold_test.language_tag = corpus.languages[static_cast<size_t>(target)].test.language_tag;
  for (const Exercise& ex : corpus.languages[static_cast<size_t>(target)].test.exercises)
    if (wanted.count(ex.meta.user)) cold_test.exercises.push_back(ex);

  ExperimentReport rep;
  for (int s = 0; s < cfg.n_seeds; ++s) {
    const uint64_t seed = cfg.train.seed + static_cast<uint64_t>(s);
    for (const bool mtl : {true, false}) {
      std::vector<Dataset> train_d, dev_d;
      if (mtl) {
        for (size_t k = 0; k < corpus.languages.size(); ++k) {
          train_d.push_back(static_cast<int>(k) == target ? target_train
                                                          : corpus.languages[k].train);
          dev_d.push_back(static_cast<int>(k) == target ? target_dev : corpus.languages[k].dev);
        }
      } else {
        train_d.push_back(target_train);
        dev_d.push_back(target_dev);
      }
      ArmData arm = prepare_arm(cfg, train_d, dev_d, target_dev, cold_test, seed);
      const ArmScore score = train_and_score(cfg, arm, seed);
      rep.rows.push_back(ReportRow{"cold-start", mtl ? "mtl" : "single",
                                   cold_test.language_tag, seed, score.auc, score.f1,
                                   static_cast<int64_t>(target_train.exercises.size())});
    }
  }
  return rep;
}

ExperimentReport cold_start_experiment(const ExperimentConfig& cfg) {
  if (cfg.synth.cold_users < 1)
    throw ConfigError("cold-start experiment: synth.cold_users must be >= 1");
  const SynthOutput corpus = generate(cfg.synth);
  return run_cold_start(cfg, corpus, corpus.cold_user_ids);
}

namespace {

ExperimentReport run_flag_grid(const ExperimentConfig& cfg, const std::string& experiment,
                               const std::vector<std::pair<std::string, ModelConfig>>& arms) {
  const SynthOutput corpus = generate(cfg.synth);
  const int target = cfg.target_language;
  ExperimentReport rep;
  for (const auto& [condition, model_cfg] : arms) {
    model_cfg.validate();  // surfaces configs that disable everything
    for (int s = 0; s < cfg.n_seeds; ++s) {
      const uint64_t seed = cfg.train.seed + static_cast<uint64_t>(s);
      ExperimentConfig arm_cfg = cfg;
      arm_cfg.model = model_cfg;
      std::vector<Dataset> train_d, dev_d;
      for (size_t k = 0; k < corpus.languages.size(); ++k) {
        train_d.push_back(corpus.languages[k].train);
        dev_d.push_back(corpus.languages[k].dev);
      }
      ArmData arm = prepare_arm(arm_cfg, train_d, dev_d,
                                corpus.languages[static_cast<size_t>(target)].dev,
                                corpus.languages[static_cast<size_t>(target)].test, seed);
      const ArmScore score = train_and_score(arm_cfg, arm, seed);
      rep.rows.push_back(ReportRow{
          experiment, condition, corpus.languages[static_cast<size_t>(target)].train.language_tag,
          seed, score.auc, score.f1,
          static_cast<int64_t>(
              corpus.languages[static_cast<size_t>(target)].train.exercises.size())});
    }
  }
  return rep;
}

}  // namespace

ExperimentReport run_encoder_ablation(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, ModelConfig>> arms;
  arms.emplace_back("full", cfg.model);
  ModelConfig no_meta = cfg.model;
  no_meta.use_meta = false;
  arms.emplace_back("no_meta", no_meta);
  ModelConfig no_word = cfg.model;
  no_word.use_word_enc = false;
  arms.emplace_back("no_word", no_word);
  ModelConfig no_char_lstm = cfg.model;
  no_char_lstm.use_char_lstm_enc = false;
  arms.emplace_back("no_char_lstm", no_char_lstm);
  ModelConfig no_char_cnn = cfg.model;
  no_char_cnn.use_char_cnn_enc = false;
  arms.emplace_back("no_char_cnn", no_char_cnn);
  ModelConfig no_char = cfg.model;
  no_char.use_char_lstm_enc = false;
  no_char.use_char_cnn_enc = false;
  arms.emplace_back("no_char_both", no_char);
  return run_flag_grid(cfg, "ablate-encoders", arms);
}

ExperimentReport run_meta_feature_ablation(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, ModelConfig>> arms;
  for (int f = 0; f < kMetaFieldCount; ++f) {
    ModelConfig masked = cfg.model;
    masked.masked[static_cast<size_t>(f)] = true;
    arms.emplace_back(std::string("mask_") + to_string(static_cast<MetaField>(f)), masked);
  }
  return run_flag_grid(cfg, "ablate-meta", arms);
}

ClusterReport cluster_users(const MTLModel& model, const std::vector<Dataset>& datasets, int k,
                            uint64_t seed) {
  if (!model.config.use_meta) throw ContractError("cluster_users: model has no user embeddings");
  if (k < 1) throw InputError("cluster_users: k must be >= 1");

  struct Acc {
    int64_t correct = 0;
    int64_t total = 0;
  };
  std::unordered_map<std::string, Acc> acc;
  for (const Dataset& ds : datasets) {
    for (const Exercise& ex : ds.exercises) {
      if (!ex.labels) continue;
      Acc& a = acc[ex.meta.user];
      for (int y : *ex.labels) {
        ++a.total;
        a.correct += 1 - y;
      }
    }
  }

  ClusterReport rep;
  const Tensor& table = model.params.value(model.meta.user_table);
  std::vector<std::vector<double>> points;
  std::vector<std::string> order;
  for (const auto& [user, a] : acc) order.push_back(user);
  std::sort(order.begin(), order.end());
  for (const std::string& user : order) {
    const int id = model.vocab.user_id(user);
    if (id < 2) continue;  // unknown to the model
    std::vector<double> row(static_cast<size_t>(table.cols));
    for (int j = 0; j < table.cols; ++j) row[static_cast<size_t>(j)] = table.at(id, j);
    points.push_back(std::move(row));
    ClusterUserRow r;
    r.user = user;
    r.accuracy = acc[user].total > 0
                     ? static_cast<double>(acc[user].correct) / static_cast<double>(acc[user].total)
                     : 0.0;
    rep.users.push_back(std::move(r));
  }
  if (static_cast<int>(points.size()) < k)
    throw InputError("cluster_users: k exceeds the number of users with data");

  const KMeansResult km = kmeans(points, k, seed);
  const auto proj = pca_2d(points);
  rep.sse_trace = km.sse_trace;
  rep.cluster_accuracy.assign(static_cast<size_t>(k), 0.0);
  std::vector<int> counts(static_cast<size_t>(k), 0);
  for (size_t i = 0; i < rep.users.size(); ++i) {
    rep.users[i].embedding = points[i];
    rep.users[i].projection = proj[i];
    rep.users[i].cluster = km.assignment[i];
    rep.cluster_accuracy[static_cast<size_t>(km.assignment[i])] += rep.users[i].accuracy;
    ++counts[static_cast<size_t>(km.assignment[i])];
  }
  for (int c = 0; c < k; ++c)
    if (counts[static_cast<size_t>(c)] > 0)
      rep.cluster_accuracy[static_cast<size_t>(c)] /= static_cast<double>(counts[static_cast<size_t>(c)]);
  return rep;
}

std::string export_embeddings(const ClusterReport& report) {
  std::string out;
  char buf[40];
  for (const ClusterUserRow& r : report.users) {
    out += r.user;
    for (double v : r.embedding) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out += ' ';
      out.append(buf, res.ptr);
    }
    out += ' ' + std::to_string(r.cluster) + ' ' + fmt6(r.accuracy) + '\n';
  }
  return out;
}

std::string cluster_csv(const ClusterReport& report) {
  std::string out = "user,x,y,cluster,accuracy\n";
  for (const ClusterUserRow& r : report.users)
    out += csv_quote(r.user) + "," + fmt6(r.projection[0]) + "," + fmt6(r.projection[1]) + "," +
           std::to_string(r.cluster) + "," + fmt6(r.accuracy) + "\n";
  out += "cluster,mean_accuracy\n";
  for (size_t c = 0; c < report.cluster_accuracy.size(); ++c)
    out += std::to_string(c) + "," + fmt6(report.cluster_accuracy[c]) + "\n";
  return out;
}

}  // namespace mtslam
