#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtslam/error.hpp"

namespace mtslam {

enum class Client : int { web = 0, android_ = 1, ios = 2, other = 3 };
enum class Session : int { lesson = 0, practice = 1, test = 2, other = 3 };
enum class Format : int { listen = 0, reverse_translate = 1, reverse_tap = 2, other = 3 };

const char* to_string(Client c);
const char* to_string(Session s);
const char* to_string(Format f);

struct ExerciseMeta {
  std::string user;
  std::vector<std::string> countries;  // non-empty, 2-letter codes
  double days = 0.0;                   // >= 0, days since course start
  Client client = Client::other;
  Session session = Session::other;
  Format format = Format::other;
  std::optional<double> time;  // seconds, >= 0 when present
};

struct Token {
  std::string instance_id;
  std::string surface;  // non-empty
  std::string pos;
  std::string morph;  // key=val|key=val, "_" when empty
  std::string dep_label;
  int dep_head = 0;  // 0 = root
};

struct Exercise {
  std::string id;
  ExerciseMeta meta;
  std::vector<Token> tokens;                 // length >= 1
  std::optional<std::vector<int>> labels;    // 0/1 per token when present
};

struct Dataset {
  std::string language_tag;  // e.g. en_es
  std::vector<Exercise> exercises;
  int parse_warnings = 0;  // unknown enum values downgraded to `other`
};

// ---- corpus text format ----
//
// Block per exercise, blocks separated by blank lines:
//   # exercise:<id> user:<u> countries:<c1|c2> days:<f> client:<s> session:<s> format:<s> time:<f|null>
//   <instance_id> <surface> <pos> <morph> <dep_label> <dep_head> [<label>]
//
// With labels_inline every token line carries a trailing 0/1 label;
// without it the label column must be absent.

Dataset parse_corpus(std::istream& in, const std::string& language_tag, bool labels_inline);
Dataset parse_corpus_file(const std::string& path, const std::string& language_tag,
                          bool labels_inline);

std::string serialize_corpus(const Dataset& dataset);

// Label file: `<instance_id> <0|1>` per line.
std::unordered_map<std::string, int> parse_label_file(std::istream& in);

// Populates labels from the map; every token instance id must be covered.
Dataset attach_labels(const Dataset& dataset, const std::unordered_map<std::string, int>& labels);

struct Stats {
  int64_t n_exercises = 0;
  int64_t n_tokens = 0;
  int64_t unique_words = 0;  // distinct lowercased surfaces
  int64_t unique_users = 0;
  double words_per_exercise = 0.0;
  std::optional<double> pct_correct;    // absent on unlabeled data
  std::optional<double> pct_incorrect;
  std::optional<double> oov_ratio;  // filled by stats_with_vocab
};

class Vocabulary;

Stats stats(const Dataset& dataset);
Stats stats_with_vocab(const Dataset& dataset, const Vocabulary& vocab);

// Uniform sample without replacement, original order preserved;
// returns the dataset unchanged when n >= size.
Dataset downsample(const Dataset& dataset, int64_t n, uint64_t seed);

// Drops every exercise whose meta.user equals user_id.
Dataset remove_user(const Dataset& dataset, const std::string& user_id);

bool operator==(const ExerciseMeta& a, const ExerciseMeta& b);
bool operator==(const Token& a, const Token& b);
bool operator==(const Exercise& a, const Exercise& b);
bool operator==(const Dataset& a, const Dataset& b);

}  // namespace mtslam
