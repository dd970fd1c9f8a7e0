#include "mtslam/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>

#include "mtslam/error.hpp"

namespace mtslam {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    const size_t comma = s.find(',', pos);
    const std::string item = trim(s.substr(pos, comma == std::string::npos ? comma : comma - pos));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

ConfigReader ConfigReader::parse(std::istream& in) {
  ConfigReader r;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (r.kv_.count(key))
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key " + key);
    r.kv_[key] = value;
  }
  return r;
}

ConfigReader ConfigReader::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  return parse(in);
}

std::string ConfigReader::take(const std::string& key) {
  consumed_[key] = true;
  const auto it = kv_.find(key);
  return it == kv_.end() ? std::string() : it->second;
}

int ConfigReader::get_int(const std::string& key, int def) {
  const std::string v = take(key);
  if (v.empty()) return def;
  int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("config key " + key + ": bad integer '" + v + "'");
  return out;
}

int64_t ConfigReader::get_int64(const std::string& key, int64_t def) {
  const std::string v = take(key);
  if (v.empty()) return def;
  int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("config key " + key + ": bad integer '" + v + "'");
  return out;
}

uint64_t ConfigReader::get_u64(const std::string& key, uint64_t def) {
  const std::string v = take(key);
  if (v.empty()) return def;
  uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("config key " + key + ": bad integer '" + v + "'");
  return out;
}

double ConfigReader::get_double(const std::string& key, double def) {
  const std::string v = take(key);
  if (v.empty()) return def;
  double out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("config key " + key + ": bad number '" + v + "'");
  return out;
}

bool ConfigReader::get_bool(const std::string& key, bool def) {
  const std::string v = take(key);
  if (v.empty()) return def;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key " + key + ": bad boolean '" + v + "'");
}

std::string ConfigReader::get_string(const std::string& key, const std::string& def) {
  const std::string v = take(key);
  return v.empty() ? def : v;
}

std::vector<int> ConfigReader::get_int_list(const std::string& key, std::vector<int> def) {
  const std::string v = take(key);
  if (v.empty()) return def;
  std::vector<int> out;
  for (const std::string& item : split_list(v)) {
    int x = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), x);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size())
      throw ConfigError("config key " + key + ": bad integer '" + item + "'");
    out.push_back(x);
  }
  return out;
}

std::vector<int64_t> ConfigReader::get_int64_list(const std::string& key,
                                                  std::vector<int64_t> def) {
  const std::string v = take(key);
  if (v.empty()) return def;
  std::vector<int64_t> out;
  for (const std::string& item : split_list(v)) {
    int64_t x = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), x);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size())
      throw ConfigError("config key " + key + ": bad integer '" + item + "'");
    out.push_back(x);
  }
  return out;
}

std::vector<double> ConfigReader::get_double_list(const std::string& key,
                                                  std::vector<double> def) {
  const std::string v = take(key);
  if (v.empty()) return def;
  std::vector<double> out;
  for (const std::string& item : split_list(v)) {
    double x = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), x);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size())
      throw ConfigError("config key " + key + ": bad number '" + item + "'");
    out.push_back(x);
  }
  return out;
}

std::vector<std::string> ConfigReader::get_string_list(const std::string& key,
                                                       std::vector<std::string> def) {
  const std::string v = take(key);
  if (v.empty()) return def;
  return split_list(v);
}

void ConfigReader::finish() const {
  std::string unknown;
  for (const auto& [key, value] : kv_)
    if (!consumed_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

ExperimentConfig load_experiment_config(ConfigReader& r) {
  ExperimentConfig cfg;

  cfg.model.embed_dim = r.get_int("embed_dim", 150);
  cfg.model.hidden_dim = r.get_int("hidden_dim", 150);
  cfg.model.dropout_rate = r.get_double("dropout_rate", 0.5);
  cfg.model.alpha = r.get_double("alpha", 0.5);
  cfg.model.cnn_kernel_widths = r.get_int_list("cnn_widths", {2, 3, 4});
  cfg.model.cnn_filters_per_width = r.get_int("cnn_filters", 50);
  cfg.model.mlp_hidden_layers = r.get_int("mlp_hidden_layers", 1);
  cfg.model.use_meta = r.get_bool("use_meta", true);
  cfg.model.use_word_enc = r.get_bool("use_word_enc", true);
  cfg.model.use_char_lstm_enc = r.get_bool("use_char_lstm_enc", true);
  cfg.model.use_char_cnn_enc = r.get_bool("use_char_cnn_enc", true);
  for (const std::string& f : r.get_string_list("mask_fields", {})) {
    const auto field = meta_field_from_string(f);
    if (!field) throw ConfigError("mask_fields: unknown meta field '" + f + "'");
    cfg.model.masked[static_cast<size_t>(*field)] = true;
  }

  cfg.train.lr = r.get_double("lr", 0.001);
  cfg.train.per_language_quota = r.get_int("quota", 32);
  cfg.train.max_epochs = r.get_int("max_epochs", 30);
  cfg.train.patience = r.get_int("patience", 3);
  cfg.train.grad_clip_norm = r.get_double("grad_clip", 5.0);
  cfg.train.seed = r.get_u64("seed", 1);
  cfg.train.alpha = cfg.model.alpha;
  cfg.train.eval_every = r.get_int("eval_every", 1);

  cfg.synth.n_languages = r.get_int("synth_languages", 3);
  cfg.synth.n_users = r.get_int("synth_users", 250);
  cfg.synth.words_per_language = r.get_int("synth_words", 120);
  cfg.synth.train_exercises = r.get_int("synth_train", 4000);
  cfg.synth.dev_exercises = r.get_int("synth_dev", 800);
  cfg.synth.test_exercises = r.get_int("synth_test", 1500);
  cfg.synth.tokens_min = r.get_int("synth_tokens_min", 2);
  cfg.synth.tokens_max = r.get_int("synth_tokens_max", 4);
  cfg.synth.seed = r.get_u64("synth_seed", 1);
  const auto fmt = r.get_double_list("synth_format_effects", {0.35, 0.0, -0.35});
  if (fmt.size() != 3) throw ConfigError("synth_format_effects: need exactly 3 values");
  for (int i = 0; i < 3; ++i) cfg.synth.format_effects[static_cast<size_t>(i)] = fmt[static_cast<size_t>(i)];
  cfg.synth.practice_gain = r.get_double("synth_practice_gain", 0.1);
  cfg.synth.noise_scale = r.get_double("synth_noise", 0.25);
  cfg.synth.cold_users = r.get_int("synth_cold_users", 0);
  cfg.synth.cold_aux_language = r.get_int("synth_cold_aux_language", 1);
  cfg.synth.cold_aux_exercises = r.get_int("synth_cold_aux_exercises", 1000);
  cfg.synth.cold_test_exercises = r.get_int("synth_cold_test_exercises", 120);
  cfg.synth.heldout_word_fraction = r.get_double("synth_heldout_fraction", 0.0);

  cfg.sizes = r.get_int64_list("sizes", {500});
  cfg.n_seeds = r.get_int("n_seeds", 5);
  cfg.target_language = r.get_int("target_language", 0);
  cfg.kmeans_k = r.get_int("kmeans_k", 4);
  cfg.chrono_sampling = r.get_bool("chrono_sampling", false);
  cfg.min_count = r.get_int("min_count", 1);

  // Environment override for every seed-bearing knob.
  if (const char* env = std::getenv("SLAM_SEED")) {
    uint64_t s = 0;
    const std::string v(env);
    const auto res = std::from_chars(v.data(), v.data() + v.size(), s);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw ConfigError("SLAM_SEED: bad integer '" + v + "'");
    cfg.train.seed = s;
    cfg.synth.seed = s;
  }
  return cfg;
}

const std::vector<ConfigKeyDoc>& config_key_docs() {
  static const std::vector<ConfigKeyDoc> docs = {
      {"embed_dim", "150", "embedding width for words, chars and meta fields"},
      {"hidden_dim", "150", "recurrent/MLP hidden width"},
      {"dropout_rate", "0.5", "dropout inside the MLPs (train mode only)"},
      {"alpha", "0.5", "class-balance weight on mistake tokens in the loss"},
      {"cnn_widths", "2,3,4", "char-CNN kernel widths"},
      {"cnn_filters", "50", "filters per kernel width"},
      {"mlp_hidden_layers", "1", "hidden relu layers per named MLP"},
      {"use_meta", "true", "enable the shared meta encoder"},
      {"use_word_enc", "true", "enable the word-level context encoder"},
      {"use_char_lstm_enc", "true", "enable the char recurrent context encoder"},
      {"use_char_cnn_enc", "true", "enable the char convolutional context encoder"},
      {"mask_fields", "", "comma list of meta fields replaced by PAD embeddings"},
      {"lr", "0.001", "Adam learning rate"},
      {"quota", "32", "exercises drawn per language per mini-batch"},
      {"max_epochs", "30", "epoch cap"},
      {"patience", "3", "dev evaluations without improvement before stopping"},
      {"grad_clip", "5.0", "global gradient-norm cap"},
      {"seed", "1", "training/init seed (SLAM_SEED env overrides)"},
      {"eval_every", "1", "epochs between dev evaluations"},
      {"min_count", "1", "words rarer than this map to UNK"},
      {"synth_languages", "3", "generated languages"},
      {"synth_users", "250", "users shared across languages"},
      {"synth_words", "120", "distinct words per language"},
      {"synth_train", "4000", "train exercises per language"},
      {"synth_dev", "800", "dev exercises per language"},
      {"synth_test", "1500", "test exercises per language"},
      {"synth_tokens_min", "2", "min tokens per exercise"},
      {"synth_tokens_max", "4", "max tokens per exercise"},
      {"synth_seed", "1", "corpus seed (SLAM_SEED env overrides)"},
      {"synth_format_effects", "0.35,0,-0.35", "logit offsets for the three formats"},
      {"synth_practice_gain", "0.1", "mistake-rate decay with log(1+days)"},
      {"synth_noise", "0.25", "per-token logit noise scale"},
      {"synth_cold_users", "0", "users trained only in the auxiliary language"},
      {"synth_cold_aux_language", "1", "language carrying the cold users' data"},
      {"synth_cold_aux_exercises", "1000", "exercises per cold user in the aux language"},
      {"synth_cold_test_exercises", "120", "target-test exercises per cold user"},
      {"synth_heldout_fraction", "0", "word share reserved for cold test rows"},
      {"sizes", "500", "low-resource grid of target train sizes"},
      {"n_seeds", "5", "repetitions per experiment arm"},
      {"target_language", "0", "language index the experiments downsample/evaluate"},
      {"kmeans_k", "4", "clusters for the user-embedding analysis"},
      {"chrono_sampling", "false", "prefix sampling instead of uniform downsampling"},
  };
  return docs;
}

}  // namespace mtslam
