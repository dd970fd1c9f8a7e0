#include "mtslam/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_set>

#include "mtslam/rng.hpp"
#include "mtslam/vocab.hpp"

namespace mtslam {

const char* to_string(Client c) {
  switch (c) {
    case Client::web: return "web";
    case Client::android_: return "android";
    case Client::ios: return "ios";
    default: return "other";
  }
}

const char* to_string(Session s) {
  switch (s) {
    case Session::lesson: return "lesson";
    case Session::practice: return "practice";
    case Session::test: return "test";
    default: return "other";
  }
}

const char* to_string(Format f) {
  switch (f) {
    case Format::listen: return "listen";
    case Format::reverse_translate: return "reverse_translate";
    case Format::reverse_tap: return "reverse_tap";
    default: return "other";
  }
}

namespace {

Client parse_client(const std::string& s, bool& known) {
  known = true;
  if (s == "web") return Client::web;
  if (s == "android") return Client::android_;
  if (s == "ios") return Client::ios;
  if (s == "other") return Client::other;
  known = false;
  return Client::other;
}

Session parse_session(const std::string& s, bool& known) {
  known = true;
  if (s == "lesson") return Session::lesson;
  if (s == "practice") return Session::practice;
  if (s == "test") return Session::test;
  if (s == "other") return Session::other;
  known = false;
  return Session::other;
}

Format parse_format(const std::string& s, bool& known) {
  known = true;
  if (s == "listen") return Format::listen;
  if (s == "reverse_translate") return Format::reverse_translate;
  if (s == "reverse_tap") return Format::reverse_tap;
  if (s == "other") return Format::other;
  known = false;
  return Format::other;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void fail(int line_no, const std::string& msg) {
  throw ParseError("line " + std::to_string(line_no) + ": " + msg);
}

double parse_double(const std::string& s, int line_no, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(line_no, std::string("bad ") + what + " value '" + s + "'");
  return v;
}

int parse_int(const std::string& s, int line_no, const char* what) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(line_no, std::string("bad ") + what + " value '" + s + "'");
  return v;
}

// `key:value`, key fixed by position in the header.
std::string take_field(const std::string& item, const char* key, int line_no) {
  const std::string prefix = std::string(key) + ":";
  if (item.rfind(prefix, 0) != 0)
    fail(line_no, "expected '" + std::string(key) + ":<value>', got '" + item + "'");
  std::string v = item.substr(prefix.size());
  if (v.empty()) fail(line_no, std::string("empty value for ") + key);
  return v;
}

std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

Dataset parse_corpus(std::istream& in, const std::string& language_tag, bool labels_inline) {
  Dataset ds;
  ds.language_tag = language_tag;
  std::unordered_set<std::string> seen_ids;

  std::string line;
  int line_no = 0;
  bool in_block = false;
  Exercise cur;
  std::vector<int> cur_labels;

  auto flush = [&](int at_line) {
    if (!in_block) return;
    if (cur.tokens.empty()) fail(at_line, "exercise " + cur.id + " has no tokens");
    if (labels_inline) cur.labels = cur_labels;
    if (!seen_ids.insert(cur.id).second)
      fail(at_line, "duplicate exercise id " + cur.id);
    ds.exercises.push_back(std::move(cur));
    cur = Exercise{};
    cur_labels.clear();
    in_block = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush(line_no);
      continue;
    }
    if (line[0] == '#') {
      flush(line_no);
      const auto items = split_ws(line.substr(1));
      if (items.size() != 8)
        fail(line_no, "header needs 8 fields (exercise user countries days client session format time), got " +
                          std::to_string(items.size()));
      in_block = true;
      cur.id = take_field(items[0], "exercise", line_no);
      cur.meta.user = take_field(items[1], "user", line_no);
      const std::string countries = take_field(items[2], "countries", line_no);
      cur.meta.countries.clear();
      size_t pos = 0;
      while (pos <= countries.size()) {
        const size_t bar = countries.find('|', pos);
        const std::string c = countries.substr(pos, bar == std::string::npos ? bar : bar - pos);
        if (c.empty()) fail(line_no, "empty country code");
        cur.meta.countries.push_back(c);
        if (bar == std::string::npos) break;
        pos = bar + 1;
      }
      cur.meta.days = parse_double(take_field(items[3], "days", line_no), line_no, "days");
      if (cur.meta.days < 0) fail(line_no, "days must be >= 0");
      bool known = true;
      cur.meta.client = parse_client(take_field(items[4], "client", line_no), known);
      if (!known) ++ds.parse_warnings;
      cur.meta.session = parse_session(take_field(items[5], "session", line_no), known);
      if (!known) ++ds.parse_warnings;
      cur.meta.format = parse_format(take_field(items[6], "format", line_no), known);
      if (!known) ++ds.parse_warnings;
      const std::string time = take_field(items[7], "time", line_no);
      if (time == "null") {
        cur.meta.time.reset();
      } else {
        const double t = parse_double(time, line_no, "time");
        if (t < 0) fail(line_no, "time must be >= 0 or null");
        cur.meta.time = t;
      }
      continue;
    }
    if (!in_block) fail(line_no, "token line outside an exercise block");
    const auto items = split_ws(line);
    const size_t expected = labels_inline ? 7 : 6;
    if (items.size() != expected)
      fail(line_no, "exercise " + cur.id + ": token line has " + std::to_string(items.size()) +
                        " fields, expected " + std::to_string(expected));
    Token tok;
    tok.instance_id = items[0];
    tok.surface = items[1];
    if (tok.surface.empty()) fail(line_no, "empty token surface");
    tok.pos = items[2];
    tok.morph = items[3];
    tok.dep_label = items[4];
    tok.dep_head = parse_int(items[5], line_no, "dep_head");
    if (tok.dep_head < 0) fail(line_no, "dep_head must be >= 0");
    if (labels_inline) {
      const int label = parse_int(items[6], line_no, "label");
      if (label != 0 && label != 1)
        fail(line_no, "exercise " + cur.id + ": label must be 0 or 1, got " + items[6]);
      cur_labels.push_back(label);
    }
    cur.tokens.push_back(std::move(tok));
  }
  flush(line_no + 1);
  return ds;
}

Dataset parse_corpus_file(const std::string& path, const std::string& language_tag,
                          bool labels_inline) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file " + path);
  return parse_corpus(in, language_tag, labels_inline);
}

std::string serialize_corpus(const Dataset& dataset) {
  std::string out;
  bool first = true;
  for (const Exercise& ex : dataset.exercises) {
    if (!first) out += "\n";
    first = false;
    out += "# exercise:" + ex.id + " user:" + ex.meta.user + " countries:";
    for (size_t i = 0; i < ex.meta.countries.size(); ++i) {
      if (i) out += "|";
      out += ex.meta.countries[i];
    }
    out += " days:" + fmt_double(ex.meta.days);
    out += std::string(" client:") + to_string(ex.meta.client);
    out += std::string(" session:") + to_string(ex.meta.session);
    out += std::string(" format:") + to_string(ex.meta.format);
    out += " time:" + (ex.meta.time ? fmt_double(*ex.meta.time) : std::string("null"));
    out += "\n";
    for (size_t t = 0; t < ex.tokens.size(); ++t) {
      const Token& tok = ex.tokens[t];
      out += tok.instance_id + " " + tok.surface + " " + tok.pos + " " + tok.morph + " " +
             tok.dep_label + " " + std::to_string(tok.dep_head);
      if (ex.labels) out += " " + std::to_string((*ex.labels)[t]);
      out += "\n";
    }
  }
  return out;
}

std::unordered_map<std::string, int> parse_label_file(std::istream& in) {
  std::unordered_map<std::string, int> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto items = split_ws(line);
    if (items.size() != 2) fail(line_no, "label line needs '<instance_id> <0|1>'");
    const int label = parse_int(items[1], line_no, "label");
    if (label != 0 && label != 1) fail(line_no, "label must be 0 or 1, got " + items[1]);
    if (!out.emplace(items[0], label).second)
      fail(line_no, "duplicate instance id " + items[0]);
  }
  return out;
}

Dataset attach_labels(const Dataset& dataset, const std::unordered_map<std::string, int>& labels) {
  Dataset out = dataset;
  for (Exercise& ex : out.exercises) {
    std::vector<int> ls;
    ls.reserve(ex.tokens.size());
    for (const Token& tok : ex.tokens) {
      const auto it = labels.find(tok.instance_id);
      if (it == labels.end())
        throw InputError("label coverage: no label for instance id " + tok.instance_id);
      ls.push_back(it->second);
    }
    ex.labels = std::move(ls);
  }
  return out;
}

Stats stats(const Dataset& dataset) {
  Stats s;
  std::unordered_set<std::string> words;
  std::unordered_set<std::string> users;
  int64_t labeled = 0, incorrect = 0;
  for (const Exercise& ex : dataset.exercises) {
    ++s.n_exercises;
    users.insert(ex.meta.user);
    for (const Token& tok : ex.tokens) {
      ++s.n_tokens;
      words.insert(lowercase_ascii(tok.surface));
    }
    if (ex.labels) {
      for (int y : *ex.labels) {
        ++labeled;
        incorrect += y;
      }
    }
  }
  s.unique_words = static_cast<int64_t>(words.size());
  s.unique_users = static_cast<int64_t>(users.size());
  s.words_per_exercise =
      s.n_exercises ? static_cast<double>(s.n_tokens) / static_cast<double>(s.n_exercises) : 0.0;
  if (labeled > 0) {
    s.pct_incorrect = static_cast<double>(incorrect) / static_cast<double>(labeled);
    s.pct_correct = 1.0 - *s.pct_incorrect;
  }
  return s;
}

Stats stats_with_vocab(const Dataset& dataset, const Vocabulary& vocab) {
  Stats s = stats(dataset);
  int64_t oov = 0;
  for (const Exercise& ex : dataset.exercises)
    for (const Token& tok : ex.tokens)
      if (vocab.word_id(lowercase_ascii(tok.surface)) == Vocabulary::kUnk) ++oov;
  s.oov_ratio = s.n_tokens ? static_cast<double>(oov) / static_cast<double>(s.n_tokens) : 0.0;
  return s;
}

Dataset downsample(const Dataset& dataset, int64_t n, uint64_t seed) {
  if (n < 0) n = 0;
  const int64_t size = static_cast<int64_t>(dataset.exercises.size());
  if (n >= size) return dataset;
  Rng rng(mix64(seed, 0x64736d70ULL));
  const std::vector<int> keep = rng.sample_indices(static_cast<int>(size), static_cast<int>(n));
  Dataset out;
  out.language_tag = dataset.language_tag;
  out.parse_warnings = dataset.parse_warnings;
  out.exercises.reserve(keep.size());
  for (int i : keep) out.exercises.push_back(dataset.exercises[static_cast<size_t>(i)]);
  return out;
}

Dataset remove_user(const Dataset& dataset, const std::string& user_id) {
  Dataset out;
  out.language_tag = dataset.language_tag;
  out.parse_warnings = dataset.parse_warnings;
  for (const Exercise& ex : dataset.exercises)
    if (ex.meta.user != user_id) out.exercises.push_back(ex);
  return out;
}

bool operator==(const ExerciseMeta& a, const ExerciseMeta& b) {
  return a.user == b.user && a.countries == b.countries && a.days == b.days &&
         a.client == b.client && a.session == b.session && a.format == b.format &&
         a.time == b.time;
}

bool operator==(const Token& a, const Token& b) {
  return a.instance_id == b.instance_id && a.surface == b.surface && a.pos == b.pos &&
         a.morph == b.morph && a.dep_label == b.dep_label && a.dep_head == b.dep_head;
}

bool operator==(const Exercise& a, const Exercise& b) {
  return a.id == b.id && a.meta == b.meta && a.tokens == b.tokens && a.labels == b.labels;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.language_tag == b.language_tag && a.exercises == b.exercises;
}

}  // namespace mtslam
