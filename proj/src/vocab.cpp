#include "mtslam/vocab.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "mtslam/error.hpp"
#include "mtslam/io_util.hpp"

namespace mtslam {

std::string lowercase_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::vector<uint32_t> utf8_codepoints(const std::string& s) {
  std::vector<uint32_t> out;
  size_t i = 0;
  const auto byte = [&](size_t k) { return static_cast<unsigned char>(s[k]); };
  while (i < s.size()) {
    const unsigned char b0 = byte(i);
    int extra = 0;
    uint32_t cp = b0;
    if (b0 < 0x80) {
      extra = 0;
    } else if ((b0 >> 5) == 0x6) {
      extra = 1;
      cp = b0 & 0x1f;
    } else if ((b0 >> 4) == 0xe) {
      extra = 2;
      cp = b0 & 0x0f;
    } else if ((b0 >> 3) == 0x1e) {
      extra = 3;
      cp = b0 & 0x07;
    } else {
      out.push_back(b0);  // invalid lead byte: keep as-is
      ++i;
      continue;
    }
    if (i + static_cast<size_t>(extra) >= s.size() + (extra == 0 ? 1 : 0) ||
        i + static_cast<size_t>(extra) > s.size() - 1) {
      out.push_back(b0);
      ++i;
      continue;
    }
    bool ok = true;
    uint32_t acc = cp;
    for (int k = 1; k <= extra; ++k) {
      const unsigned char bk = byte(i + static_cast<size_t>(k));
      if ((bk >> 6) != 0x2) {
        ok = false;
        break;
      }
      acc = (acc << 6) | (bk & 0x3f);
    }
    if (!ok) {
      out.push_back(b0);
      ++i;
      continue;
    }
    out.push_back(acc);
    i += static_cast<size_t>(extra) + 1;
  }
  return out;
}

int Vocabulary::word_id(const std::string& w) const {
  const auto it = word_idx_.find(w);
  return it == word_idx_.end() ? kUnk : it->second;
}

int Vocabulary::char_id(uint32_t cp) const {
  const auto it = char_idx_.find(cp);
  return it == char_idx_.end() ? kUnk : it->second;
}

int Vocabulary::user_id(const std::string& u) const {
  const auto it = user_idx_.find(u);
  return it == user_idx_.end() ? kUnk : it->second;
}

int Vocabulary::country_id(const std::string& c) const {
  const auto it = country_idx_.find(c);
  return it == country_idx_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::user_string(int id) const {
  static const std::string unk = "<unk>";
  static const std::string pad = "<pad>";
  if (id == kUnk) return unk;
  if (id == kPad) return pad;
  return users_[static_cast<size_t>(id - 2)];
}

int Vocabulary::days_bucket(double days) {
  static constexpr double bounds[] = {0.5, 1, 2, 4, 7, 14, 30, 60, 120};
  int b = 0;
  for (double x : bounds) {
    if (days < x) return b;
    ++b;
  }
  return b;  // >= 120 -> bucket 9
}

int Vocabulary::time_bucket(const std::optional<double>& time) {
  if (!time) return 0;
  static constexpr double bounds[] = {2, 4, 8, 16, 32, 64};
  int b = 1;
  for (double x : bounds) {
    if (*time < x) return b;
    ++b;
  }
  return b;  // >= 64 s -> bucket 7
}

void Vocabulary::rebuild_indices() {
  word_idx_.clear();
  char_idx_.clear();
  user_idx_.clear();
  country_idx_.clear();
  for (size_t i = 0; i < words_.size(); ++i) word_idx_[words_[i]] = static_cast<int>(i) + 2;
  for (size_t i = 0; i < chars_.size(); ++i) char_idx_[chars_[i]] = static_cast<int>(i) + 2;
  for (size_t i = 0; i < users_.size(); ++i) user_idx_[users_[i]] = static_cast<int>(i) + 2;
  for (size_t i = 0; i < countries_.size(); ++i)
    country_idx_[countries_[i]] = static_cast<int>(i) + 2;
}

namespace {

template <typename K>
std::vector<K> by_frequency(std::unordered_map<K, int64_t>& counts) {
  std::vector<std::pair<K, int64_t>> items(counts.begin(), counts.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<K> out;
  out.reserve(items.size());
  for (auto& [k, c] : items) out.push_back(k);
  return out;
}

}  // namespace

Vocabulary build_vocab(const std::vector<Dataset>& datasets, int min_count) {
  if (min_count < 1) throw ContractError("build_vocab: min_count must be >= 1");
  if (datasets.empty()) throw InputError("build_vocab: no datasets");
  std::unordered_map<std::string, int64_t> word_counts;
  std::unordered_map<uint32_t, int64_t> char_counts;
  std::unordered_map<std::string, int64_t> user_counts;
  std::unordered_map<std::string, int64_t> country_counts;
  for (const Dataset& ds : datasets) {
    for (const Exercise& ex : ds.exercises) {
      ++user_counts[ex.meta.user];
      for (const std::string& c : ex.meta.countries) ++country_counts[c];
      for (const Token& tok : ex.tokens) {
        ++word_counts[lowercase_ascii(tok.surface)];
        for (uint32_t cp : utf8_codepoints(tok.surface)) ++char_counts[cp];
      }
    }
  }
  for (auto it = word_counts.begin(); it != word_counts.end();) {
    if (it->second < min_count)
      it = word_counts.erase(it);
    else
      ++it;
  }
  Vocabulary v;
  v.words_ = by_frequency(word_counts);
  v.chars_ = by_frequency(char_counts);
  v.users_ = by_frequency(user_counts);
  v.countries_ = by_frequency(country_counts);
  v.rebuild_indices();
  return v;
}

void Vocabulary::save(std::ostream& out) const {
  io::write_u64(out, words_.size());
  for (const auto& w : words_) io::write_string(out, w);
  io::write_u64(out, chars_.size());
  for (uint32_t c : chars_) io::write_u32(out, c);
  io::write_u64(out, users_.size());
  for (const auto& u : users_) io::write_string(out, u);
  io::write_u64(out, countries_.size());
  for (const auto& c : countries_) io::write_string(out, c);
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary v;
  const uint64_t nw = io::read_u64(in);
  v.words_.reserve(nw);
  for (uint64_t i = 0; i < nw; ++i) v.words_.push_back(io::read_string(in));
  const uint64_t nc = io::read_u64(in);
  v.chars_.reserve(nc);
  for (uint64_t i = 0; i < nc; ++i) v.chars_.push_back(io::read_u32(in));
  const uint64_t nu = io::read_u64(in);
  v.users_.reserve(nu);
  for (uint64_t i = 0; i < nu; ++i) v.users_.push_back(io::read_string(in));
  const uint64_t nk = io::read_u64(in);
  v.countries_.reserve(nk);
  for (uint64_t i = 0; i < nk; ++i) v.countries_.push_back(io::read_string(in));
  v.rebuild_indices();
  return v;
}

EncodedExercise encode(const Exercise& exercise, const Vocabulary& vocab, int language_index) {
  EncodedExercise e;
  e.exercise_id = exercise.id;
  e.language = language_index;
  e.user = vocab.user_id(exercise.meta.user);
  for (const std::string& c : exercise.meta.countries) e.countries.push_back(vocab.country_id(c));
  e.days_bucket = Vocabulary::days_bucket(exercise.meta.days);
  e.client = static_cast<int>(exercise.meta.client);
  e.session = static_cast<int>(exercise.meta.session);
  e.format = static_cast<int>(exercise.meta.format);
  e.time_bucket = Vocabulary::time_bucket(exercise.meta.time);
  e.word_ids.reserve(exercise.tokens.size());
  e.char_ids.reserve(exercise.tokens.size());
  for (const Token& tok : exercise.tokens) {
    e.instance_ids.push_back(tok.instance_id);
    e.word_ids.push_back(vocab.word_id(lowercase_ascii(tok.surface)));
    std::vector<int> cs;
    for (uint32_t cp : utf8_codepoints(tok.surface)) cs.push_back(vocab.char_id(cp));
    e.char_ids.push_back(std::move(cs));
  }
  e.labels = exercise.labels;
  return e;
}

std::vector<EncodedExercise> encode_dataset(const Dataset& dataset, const Vocabulary& vocab,
                                            int language_index) {
  std::vector<EncodedExercise> out;
  out.reserve(dataset.exercises.size());
  for (const Exercise& ex : dataset.exercises) out.push_back(encode(ex, vocab, language_index));
  return out;
}

}  // namespace mtslam
