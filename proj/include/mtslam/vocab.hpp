#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtslam/data.hpp"

namespace mtslam {

// ASCII-only lowercasing; the word vocabulary is case-folded, characters keep
// their case so the char encoders can see capitalization.
std::string lowercase_ascii(const std::string& s);

// UTF-8 decode with byte-value fallback on invalid sequences.
std::vector<uint32_t> utf8_codepoints(const std::string& s);

// String/char <-> id maps shared across all languages. Ids 0 and 1 are
// reserved for UNK and PAD in every map; remaining ids are assigned in
// descending frequency order with lexicographic tie-breaks, which makes
// builds reproducible. User and country spaces are shared across datasets;
// that sharing is what lets a user's representation transfer to a language
// they have no training data in.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kPad = 1;

  int word_id(const std::string& lowercased) const;
  int char_id(uint32_t cp) const;
  int user_id(const std::string& user) const;
  int country_id(const std::string& country) const;

  int word_count() const { return 2 + static_cast<int>(words_.size()); }
  int char_count() const { return 2 + static_cast<int>(chars_.size()); }
  int user_count() const { return 2 + static_cast<int>(users_.size()); }
  int country_count() const { return 2 + static_cast<int>(countries_.size()); }

  const std::string& user_string(int id) const;

  // days -> one of 10 buckets with boundaries
  // {0, 0.5, 1, 2, 4, 7, 14, 30, 60, 120, inf}.
  static int days_bucket(double days);
  static constexpr int kDaysBuckets = 10;

  // time -> one of 8 buckets: missing, then log-spaced
  // {0-2, 2-4, 4-8, 8-16, 16-32, 32-64, >=64} seconds.
  static int time_bucket(const std::optional<double>& time);
  static constexpr int kTimeBuckets = 8;

  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

  bool operator==(const Vocabulary& other) const {
    return words_ == other.words_ && chars_ == other.chars_ && users_ == other.users_ &&
           countries_ == other.countries_;
  }

  friend Vocabulary build_vocab(const std::vector<Dataset>& datasets, int min_count);

 private:
  void rebuild_indices();

  std::vector<std::string> words_;      // id 2 + index
  std::vector<uint32_t> chars_;
  std::vector<std::string> users_;
  std::vector<std::string> countries_;
  std::unordered_map<std::string, int> word_idx_;
  std::unordered_map<uint32_t, int> char_idx_;
  std::unordered_map<std::string, int> user_idx_;
  std::unordered_map<std::string, int> country_idx_;
};

// Counts over every dataset pooled; words below min_count map to UNK, chars,
// users and countries are always kept.
Vocabulary build_vocab(const std::vector<Dataset>& datasets, int min_count);

// Index-space image of an Exercise. Encoding is total: anything unseen
// degrades to UNK.
struct EncodedExercise {
  std::string exercise_id;
  std::vector<std::string> instance_ids;
  std::vector<int> word_ids;
  std::vector<std::vector<int>> char_ids;  // per word, original case
  int user = Vocabulary::kUnk;
  std::vector<int> countries;
  int days_bucket = 0;
  int client = 0;
  int session = 0;
  int format = 0;
  int time_bucket = 0;
  std::optional<std::vector<int>> labels;
  int language = 0;

  int length() const { return static_cast<int>(word_ids.size()); }
};

EncodedExercise encode(const Exercise& exercise, const Vocabulary& vocab, int language_index);

std::vector<EncodedExercise> encode_dataset(const Dataset& dataset, const Vocabulary& vocab,
                                            int language_index);

}  // namespace mtslam
