#pragma once

// Shared fixtures for the model/training test binaries.

#include <string>
#include <vector>

#include "mtslam/data.hpp"
#include "mtslam/model.hpp"
#include "mtslam/rng.hpp"
#include "mtslam/vocab.hpp"

namespace mtslam::testutil {

// Labeled corpus with a handful of users and words; labels carry a weak
// per-user signal so toy training runs have something to learn.
inline Dataset tiny_corpus(int n, uint64_t seed, const std::string& tag = "aa_bb",
                           int n_users = 6, int n_words = 12) {
  Rng rng(mix64(seed, 0x7465ULL));
  Dataset ds;
  ds.language_tag = tag;
  const std::vector<std::string> cc{"CN", "US", "BR"};
  std::vector<std::string> words;
  for (int w = 0; w < n_words; ++w) {
    std::string s;
    const char* cons = "bcdfgklmnprst";
    const char* vow = "aeiou";
    for (int k = 0; k < 2 + w % 3; ++k) {
      s += cons[(w * 7 + k * 3) % 13];
      s += vow[(w + k) % 5];
    }
    words.push_back(s);
  }
  for (int i = 0; i < n; ++i) {
    Exercise ex;
    ex.id = tag + "_e" + std::to_string(i);
    const int u = rng.range_int(0, n_users - 1);
    ex.meta.user = "u" + std::to_string(u);
    ex.meta.countries = {cc[static_cast<size_t>(u % 3)]};
    ex.meta.days = rng.uniform(0, 30);
    ex.meta.client = static_cast<Client>(rng.range_int(0, 2));
    ex.meta.session = static_cast<Session>(rng.range_int(0, 2));
    ex.meta.format = static_cast<Format>(rng.range_int(0, 2));
    ex.meta.time = rng.uniform(1, 60);
    const int l = rng.range_int(1, 3);
    std::vector<int> labels;
    for (int t = 0; t < l; ++t) {
      Token tok;
      tok.instance_id = ex.id + "t" + std::to_string(t + 1);
      const int w = rng.range_int(0, n_words - 1);
      tok.surface = words[static_cast<size_t>(w)];
      tok.pos = "X";
      tok.morph = "_";
      tok.dep_label = "root";
      ex.tokens.push_back(tok);
      // mistake probability rises with word index, falls with user index
      const double p = 1.0 / (1.0 + std::exp(-(0.4 * w - 0.5 * u)));
      labels.push_back(rng.bernoulli(p) ? 1 : 0);
    }
    ex.labels = labels;
    ds.exercises.push_back(ex);
  }
  return ds;
}

// Labels are a deterministic function of (word, user), so a model with
// enough capacity can memorize the corpus perfectly.
inline Dataset toy_memorization_corpus(int n, uint64_t seed, const std::string& tag = "aa_bb") {
  Dataset ds = tiny_corpus(n, seed, tag);
  for (Exercise& ex : ds.exercises) {
    const int u = std::stoi(ex.meta.user.substr(1));
    std::vector<int> labels;
    for (const Token& tok : ex.tokens) {
      int h = u;
      for (char c : tok.surface) h = h * 31 + c;
      labels.push_back(((h % 7) + 7) % 7 < 3 ? 1 : 0);
    }
    ex.labels = labels;
  }
  return ds;
}

inline ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.embed_dim = 5;
  cfg.hidden_dim = 4;
  cfg.dropout_rate = 0.0;
  cfg.cnn_kernel_widths = {2, 3};
  cfg.cnn_filters_per_width = 2;
  cfg.mlp_hidden_layers = 1;
  return cfg;
}

}  // namespace mtslam::testutil
