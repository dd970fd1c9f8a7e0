// mtslam: multi-task second-language-acquisition modeling toolkit.
//
// Subcommands: stats, synth, train, eval, predict, score, experiment.
// Exit codes: 0 success, 1 usage error, 2 data/format error.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mtslam/config.hpp"
#include "mtslam/data.hpp"
#include "mtslam/error.hpp"
#include "mtslam/experiments.hpp"
#include "mtslam/metrics.hpp"
#include "mtslam/synth.hpp"
#include "mtslam/train.hpp"

namespace fs = std::filesystem;
using namespace mtslam;

namespace {

struct LangPath {
  std::string tag;
  std::string path;
};

LangPath split_lang_path(const std::string& arg) {
  const size_t eq = arg.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= arg.size())
    throw InputError("expected <lang>=<path>, got '" + arg + "'");
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("write failure on " + path);
}

ExperimentConfig read_experiment_config(const std::string& path) {
  ConfigReader reader = path.empty() ? ConfigReader() : ConfigReader::parse_file(path);
  ExperimentConfig cfg = load_experiment_config(reader);
  reader.finish();
  return cfg;
}

int resolve_language(const MTLModel& model, const std::string& lang_flag) {
  if (!lang_flag.empty()) {
    const int idx = model.language_index(lang_flag);
    if (idx < 0) throw InputError("model has no language '" + lang_flag + "'");
    return idx;
  }
  if (model.n_languages() == 1) return 0;
  throw InputError("model has several languages; pass --lang");
}

int cmd_stats(const std::string& corpus, const std::string& labels_path, bool labels_inline) {
  Dataset ds = parse_corpus_file(corpus, "corpus", labels_inline);
  if (!labels_path.empty()) {
    std::ifstream in(labels_path);
    if (!in) throw IoError("cannot open label file " + labels_path);
    ds = attach_labels(ds, parse_label_file(in));
  }
  const Stats s = stats(ds);
  std::cout << "exercises " << s.n_exercises << "\n";
  std::cout << "tokens " << s.n_tokens << "\n";
  std::cout << "unique_words " << s.unique_words << "\n";
  std::cout << "unique_users " << s.unique_users << "\n";
  std::printf("words_per_exercise %.2f\n", s.words_per_exercise);
  if (s.pct_correct) {
    std::printf("pct_correct %.4f\n", *s.pct_correct);
    std::printf("pct_incorrect %.4f\n", *s.pct_incorrect);
  }
  if (ds.parse_warnings > 0)
    std::cerr << "warning: " << ds.parse_warnings << " unknown enum values mapped to 'other'\n";
  return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
  const ExperimentConfig cfg = read_experiment_config(config_path);
  const SynthOutput out = generate(cfg.synth);
  fs::create_directories(out_dir);
  for (const auto& lang : out.languages) {
    const std::string base = out_dir + "/" + lang.train.language_tag;
    write_file(base + ".train.txt", serialize_corpus(lang.train));
    write_file(base + ".dev.txt", serialize_corpus(lang.dev));
    write_file(base + ".test.txt", serialize_corpus(lang.test));
  }
  write_file(out_dir + "/bookkeeping.txt", serialize_bookkeeping(out.bookkeeping));
  std::cout << "wrote " << out.languages.size() << " languages to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& train_args,
              const std::vector<std::string>& dev_args, const std::string& out_path,
              const std::string& history_path) {
  ConfigReader reader =
      config_path.empty() ? ConfigReader() : ConfigReader::parse_file(config_path);
  ExperimentConfig cfg = load_experiment_config(reader);
  reader.finish();

  std::vector<Dataset> train_d;
  std::vector<Dataset> dev_d;
  std::vector<std::string> tags;
  std::vector<bool> dev_seen;
  for (const std::string& arg : train_args) {
    const LangPath lp = split_lang_path(arg);
    tags.push_back(lp.tag);
    train_d.push_back(parse_corpus_file(lp.path, lp.tag, true));
  }
  dev_d.resize(train_d.size());
  dev_seen.assign(train_d.size(), false);
  for (const std::string& arg : dev_args) {
    const LangPath lp = split_lang_path(arg);
    bool found = false;
    for (size_t k = 0; k < tags.size(); ++k)
      if (tags[k] == lp.tag) {
        dev_d[k] = parse_corpus_file(lp.path, lp.tag, true);
        dev_seen[k] = true;
        found = true;
      }
    if (!found) throw InputError("--dev language " + lp.tag + " has no matching --train");
  }
  for (size_t k = 0; k < tags.size(); ++k)
    if (!dev_seen[k]) throw InputError("missing --dev corpus for language " + tags[k]);

  const Vocabulary vocab = build_vocab(train_d, cfg.min_count);
  MTLModel model = init_model(cfg.model, vocab, tags, cfg.train.seed);
  EncodedSets train_sets, dev_sets;
  for (size_t k = 0; k < train_d.size(); ++k) {
    train_sets.push_back(encode_dataset(train_d[k], vocab, static_cast<int>(k)));
    dev_sets.push_back(encode_dataset(dev_d[k], vocab, static_cast<int>(k)));
  }
  TrainResult res = train(model, train_sets, dev_sets, cfg.train);
  save_checkpoint_file(res.best_model, &res.state, out_path);

  if (!history_path.empty()) {
    std::string hist = "epoch";
    for (const std::string& tag : tags)
      hist += ",loss_" + tag + ",dev_auc_" + tag + ",dev_f1_" + tag;
    hist += ",mean_dev_auc\n";
    for (const auto& row : res.history.epochs) {
      hist += std::to_string(row.epoch);
      for (size_t k = 0; k < tags.size(); ++k) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.6f", row.train_loss[k],
                      k < row.dev_auc.size() ? row.dev_auc[k] : 0.0,
                      k < row.dev_f1.size() ? row.dev_f1[k] : 0.0);
        hist += buf;
      }
      char buf[32];
      std::snprintf(buf, sizeof(buf), ",%.6f\n", row.mean_dev_auc);
      hist += buf;
    }
    write_file(history_path, hist);
  }

  std::cout << "best_epoch " << res.history.best_epoch << "\n";
  std::cout << "saved " << out_path << "\n";
  return 0;
}

std::vector<EncodedExercise> load_labeled_data(const MTLModel& model, const std::string& data_path,
                                               const std::string& labels_path,
                                               const std::string& lang_flag) {
  // With a separate label file the corpus itself must be unlabeled.
  Dataset ds = parse_corpus_file(data_path, "data", labels_path.empty());
  if (!labels_path.empty()) {
    std::ifstream in(labels_path);
    if (!in) throw IoError("cannot open label file " + labels_path);
    ds = attach_labels(ds, parse_label_file(in));
  }
  const int lang = resolve_language(model, lang_flag);
  return encode_dataset(ds, model.vocab, lang);
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& labels_path, const std::string& lang_flag) {
  const Checkpoint ck = load_checkpoint_file(model_path);
  const auto data = load_labeled_data(ck.model, data_path, labels_path, lang_flag);
  const EvalResult ev = evaluate(ck.model, data);
  std::printf("auc %.6f f1 %.6f n_tokens %lld\n", ev.auc, ev.f1,
              static_cast<long long>(ev.n_tokens));
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path, bool labels_inline, const std::string& lang_flag) {
  const Checkpoint ck = load_checkpoint_file(model_path);
  Dataset ds = parse_corpus_file(data_path, "data", labels_inline);
  const int lang = resolve_language(ck.model, lang_flag);
  const auto data = encode_dataset(ds, ck.model.vocab, lang);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw IoError("cannot open " + out_path + " for writing");
  predict_to_file(ck.model, data, out);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_score(const std::string& pred_path, const std::string& labels_path) {
  std::ifstream pred(pred_path);
  if (!pred) throw IoError("cannot open prediction file " + pred_path);
  std::ifstream lab(labels_path);
  if (!lab) throw IoError("cannot open label file " + labels_path);
  const auto labels = parse_label_file(lab);

  ScoredLabels scored;
  std::string line;
  int line_no = 0;
  while (std::getline(pred, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string id;
    double p = 0;
    if (!(is >> id >> p))
      throw ParseError("prediction line " + std::to_string(line_no) + ": expected '<id> <prob>'");
    const auto it = labels.find(id);
    if (it == labels.end()) throw InputError("prediction instance " + id + " has no label");
    scored.push(p, it->second);
  }
  if (scored.size() == 0) throw InputError("empty prediction file");
  std::printf("auc %.6f f1 %.6f\n", auc(scored), f1_at(scored, 0.5).f1);
  return 0;
}

int cmd_experiment(const std::string& kind, const std::string& config_path,
                   const std::string& out_path, const std::string& export_prefix) {
  const ExperimentConfig cfg = read_experiment_config(config_path);
  ExperimentReport rep;
  if (kind == "low-resource") {
    rep = low_resource_experiment(cfg);
  } else if (kind == "cold-start") {
    rep = cold_start_experiment(cfg);
  } else if (kind == "ablate-encoders") {
    rep = run_encoder_ablation(cfg);
  } else if (kind == "ablate-meta") {
    rep = run_meta_feature_ablation(cfg);
  } else if (kind == "cluster") {
    const SynthOutput corpus = generate(cfg.synth);
    std::vector<Dataset> train_d, dev_d;
    for (const auto& lang : corpus.languages) {
      train_d.push_back(lang.train);
      dev_d.push_back(lang.dev);
    }
    const Vocabulary vocab = build_vocab(train_d, cfg.min_count);
    std::vector<std::string> tags;
    for (const Dataset& d : train_d) tags.push_back(d.language_tag);
    MTLModel model = init_model(cfg.model, vocab, tags, cfg.train.seed);
    EncodedSets train_sets, dev_sets;
    for (size_t k = 0; k < train_d.size(); ++k) {
      train_sets.push_back(encode_dataset(train_d[k], vocab, static_cast<int>(k)));
      dev_sets.push_back(encode_dataset(dev_d[k], vocab, static_cast<int>(k)));
    }
    const TrainResult res = train(model, train_sets, dev_sets, cfg.train);
    const ClusterReport cr = cluster_users(res.best_model, train_d, cfg.kmeans_k, cfg.train.seed);
    write_file(out_path, cluster_csv(cr));
    if (!export_prefix.empty())
      write_file(export_prefix + ".embeddings.txt", export_embeddings(cr));
    std::cout << "wrote " << out_path << "\n";
    return 0;
  } else {
    std::cerr << "unknown experiment '" << kind
              << "'; expected low-resource|cold-start|ablate-encoders|ablate-meta|cluster\n";
    return 1;
  }
  write_file(out_path, emit_csv(rep));
  std::cout << "wrote " << out_path << " (" << rep.rows.size() << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task second-language-acquisition modeling toolkit"};
  app.require_subcommand(1);

  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics");
  std::string stats_corpus, stats_labels;
  bool stats_unlabeled = false;
  stats_cmd->add_option("corpus", stats_corpus, "corpus file")->required();
  stats_cmd->add_option("--labels", stats_labels, "separate label file");
  stats_cmd->add_flag("--unlabeled", stats_unlabeled, "corpus has no inline labels");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
  std::string synth_config, synth_out;
  synth_cmd->add_option("--config", synth_config, "key = value config file");
  synth_cmd->add_option("--out-dir", synth_out, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train a multi-task model");
  std::string train_config, train_out = "model.ckpt", train_history;
  std::vector<std::string> train_data, dev_data;
  train_cmd->add_option("--config", train_config, "key = value config file");
  train_cmd->add_option("--train", train_data, "<lang>=<corpus> (repeatable)")->required();
  train_cmd->add_option("--dev", dev_data, "<lang>=<corpus> (repeatable)")->required();
  train_cmd->add_option("--out", train_out, "checkpoint path");
  train_cmd->add_option("--history", train_history, "write per-epoch history CSV");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on labeled data");
  std::string eval_model, eval_data, eval_labels, eval_lang;
  eval_cmd->add_option("--model", eval_model, "checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "corpus file (inline labels unless --labels)")
      ->required();
  eval_cmd->add_option("--labels", eval_labels, "separate label file");
  eval_cmd->add_option("--lang", eval_lang, "language tag (required for multi-language models)");

  auto* predict_cmd = app.add_subcommand("predict", "Write per-token probabilities");
  std::string pred_model, pred_data, pred_out, pred_lang;
  bool pred_labeled = false;
  predict_cmd->add_option("--model", pred_model, "checkpoint")->required();
  predict_cmd->add_option("--data", pred_data, "corpus file")->required();
  predict_cmd->add_option("--out", pred_out, "prediction file")->required();
  predict_cmd->add_option("--lang", pred_lang, "language tag");
  predict_cmd->add_flag("--labels-inline", pred_labeled, "corpus carries inline labels");

  auto* score_cmd = app.add_subcommand("score", "Score a prediction file against labels");
  std::string score_pred, score_labels;
  score_cmd->add_option("--pred", score_pred, "prediction file")->required();
  score_cmd->add_option("--labels", score_labels, "label file")->required();

  auto* exp_cmd = app.add_subcommand("experiment", "Scripted experiment reproductions");
  std::string exp_kind, exp_config, exp_out = "report.csv", exp_export;
  exp_cmd
      ->add_option("kind", exp_kind, "low-resource|cold-start|ablate-encoders|ablate-meta|cluster")
      ->required();
  exp_cmd->add_option("--config", exp_config, "key = value config file");
  exp_cmd->add_option("--out", exp_out, "report CSV path");
  exp_cmd->add_option("--export", exp_export, "prefix for embedding exports (cluster)");

  auto* keys_cmd = app.add_subcommand("config-keys", "List every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage/help text
    return code == 0 ? 0 : 1;
  }

  try {
    if (stats_cmd->parsed())
      return cmd_stats(stats_corpus, stats_labels, !stats_unlabeled && stats_labels.empty());
    if (synth_cmd->parsed()) return cmd_synth(synth_config, synth_out);
    if (train_cmd->parsed())
      return cmd_train(train_config, train_data, dev_data, train_out, train_history);
    if (eval_cmd->parsed()) return cmd_eval(eval_model, eval_data, eval_labels, eval_lang);
    if (predict_cmd->parsed())
      return cmd_predict(pred_model, pred_data, pred_out, pred_labeled, pred_lang);
    if (score_cmd->parsed()) return cmd_score(score_pred, score_labels);
    if (exp_cmd->parsed()) return cmd_experiment(exp_kind, exp_config, exp_out, exp_export);
    if (keys_cmd->parsed()) {
      for (const ConfigKeyDoc& d : config_key_docs())
        std::printf("%-28s %-12s %s\n", d.key, d.def, d.doc);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
