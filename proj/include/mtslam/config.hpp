#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mtslam/experiments.hpp"

namespace mtslam {

// Flat `key = value` configuration. Parsing collects raw pairs; the typed
// readers consume keys, and finish() rejects anything left over, so every
// recognized key is exactly the set the builders read.
class ConfigReader {
 public:
  ConfigReader() = default;
  static ConfigReader parse(std::istream& in);
  static ConfigReader parse_file(const std::string& path);

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  int get_int(const std::string& key, int def);
  int64_t get_int64(const std::string& key, int64_t def);
  uint64_t get_u64(const std::string& key, uint64_t def);
  double get_double(const std::string& key, double def);
  bool get_bool(const std::string& key, bool def);
  std::string get_string(const std::string& key, const std::string& def);
  std::vector<int> get_int_list(const std::string& key, std::vector<int> def);
  std::vector<int64_t> get_int64_list(const std::string& key, std::vector<int64_t> def);
  std::vector<double> get_double_list(const std::string& key, std::vector<double> def);
  std::vector<std::string> get_string_list(const std::string& key,
                                           std::vector<std::string> def);

  // Throws ConfigError naming any key no reader consumed.
  void finish() const;

 private:
  std::string take(const std::string& key);
  std::map<std::string, std::string> kv_;
  std::map<std::string, bool> consumed_;
};

// Builds the full experiment configuration (model + training + synthetic
// corpus + grids) from a flat config, honoring the SLAM_SEED environment
// override.
ExperimentConfig load_experiment_config(ConfigReader& reader);

// The documented key registry: name, default, one-line description.
struct ConfigKeyDoc {
  const char* key;
  const char* def;
  const char* doc;
};
const std::vector<ConfigKeyDoc>& config_key_docs();

}  // namespace mtslam
