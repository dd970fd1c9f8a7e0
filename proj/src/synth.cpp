#include "mtslam/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_set>

#include "mtslam/error.hpp"
#include "mtslam/metrics.hpp"
#include "mtslam/rng.hpp"

namespace mtslam {

void SynthConfig::validate() const {
  if (n_languages < 1 || n_users < 1 || words_per_language < 1)
    throw ConfigError("synth: counts must be >= 1");
  if (train_exercises < 1 || dev_exercises < 1 || test_exercises < 1)
    throw ConfigError("synth: split sizes must be >= 1");
  if (tokens_min < 1 || tokens_max < tokens_min)
    throw ConfigError("synth: bad tokens_per_exercise range");
  if (noise_scale < 0.0 || practice_gain < 0.0)
    throw ConfigError("synth: noise_scale and practice_gain must be >= 0");
  if (heldout_word_fraction < 0.0 || heldout_word_fraction >= 1.0)
    throw ConfigError("synth: heldout_word_fraction must be in [0,1)");
  if (cold_users > 0) {
    if (n_languages < 2) throw ConfigError("synth: cold-start needs >= 2 languages");
    if (cold_aux_language < 1 || cold_aux_language >= n_languages)
      throw ConfigError("synth: cold_aux_language out of range");
    if (heldout_word_fraction <= 0.0)
      throw ConfigError("synth: cold-start rows need a held-out word fraction");
  }
}

double mistake_probability(double difficulty, double format_effect, double ability, double days,
                           double practice_gain, double noise) {
  const double logit = difficulty + format_effect - ability - practice_gain * std::log1p(days) + noise;
  return 1.0 / (1.0 + std::exp(-logit));
}

namespace {

constexpr const char* kCountryPool[] = {"US", "CN", "BR", "DE", "KR", "FR",
                                        "JP", "MX", "IN", "RU", "ES", "IT"};

std::string pad_num(int v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

// Language-specific surface shapes: disjoint consonant pools give the char
// encoders per-language structure to learn.
std::vector<std::string> make_words(int lang, int count, Rng& rng) {
  static const std::string consonants = "bcdfghjklmnpqrstvwxyz";  // 21
  static const std::string vowels = "aeiou";
  const int pool_size = 7;
  const int off = (lang * pool_size) % static_cast<int>(consonants.size());
  std::unordered_set<std::string> seen;
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < count) {
    std::string w;
    const int syllables = rng.range_int(1, 3);
    for (int s = 0; s < syllables; ++s) {
      w += consonants[static_cast<size_t>((off + rng.range_int(0, pool_size - 1)) %
                                          static_cast<int>(consonants.size()))];
      w += vowels[static_cast<size_t>(rng.range_int(0, 4))];
    }
    if (rng.bernoulli(0.3))
      w += consonants[static_cast<size_t>((off + rng.range_int(0, pool_size - 1)) %
                                          static_cast<int>(consonants.size()))];
    if (seen.insert(w).second) out.push_back(w);
  }
  return out;
}

struct UserInfo {
  std::string id;
  double ability = 0.0;
  std::vector<std::string> countries;
};

struct LangLatents {
  std::string tag;
  std::vector<std::string> words;
  std::vector<double> difficulty;
  int regular_words = 0;  // words [regular_words, size) are held out
};

struct Generator {
  const SynthConfig& cfg;
  std::vector<UserInfo> users;       // regular
  std::vector<UserInfo> cold_users;  // train in aux language only
  std::vector<LangLatents> langs;
  SynthOutput out;

  explicit Generator(const SynthConfig& c) : cfg(c) {}

  UserInfo make_user(const std::string& id, Rng& rng) {
    UserInfo u;
    u.id = id;
    u.ability = rng.normal();
    u.countries.push_back(kCountryPool[rng.below(12)]);
    if (rng.bernoulli(0.25)) {
      std::string second = kCountryPool[rng.below(12)];
      if (second != u.countries[0]) u.countries.push_back(second);
    }
    out.abilities[u.id] = u.ability;
    return u;
  }

  Exercise make_exercise(int lang, int split, int index, const UserInfo& user, bool heldout_words,
                         Rng& rng, std::vector<BookEntry>& book) {
    const LangLatents& L = langs[static_cast<size_t>(lang)];
    Exercise ex;
    ex.id = L.tag + "_" + std::to_string(split) + "_" + pad_num(index, 6);
    ex.meta.user = user.id;
    ex.meta.countries = user.countries;
    ex.meta.days = std::floor(rng.uniform(0.0, 60.0) * 1000.0) / 1000.0;
    ex.meta.client = static_cast<Client>(rng.range_int(0, 2));
    ex.meta.session = static_cast<Session>(rng.range_int(0, 2));
    const int fmt = rng.range_int(0, 2);
    ex.meta.format = static_cast<Format>(fmt);
    if (rng.bernoulli(0.95))
      ex.meta.time = std::floor(std::min(300.0, std::max(0.3, std::exp(rng.normal(2.2, 0.9)))) * 10.0) / 10.0;

    const int l = rng.range_int(cfg.tokens_min, cfg.tokens_max);
    std::vector<int> labels;
    const int lo = heldout_words ? L.regular_words : 0;
    const int hi = heldout_words ? static_cast<int>(L.words.size()) : L.regular_words;
    for (int t = 0; t < l; ++t) {
      const int w = rng.range_int(lo, hi - 1);
      Token tok;
      tok.instance_id = ex.id + "t" + std::to_string(t + 1);
      tok.surface = L.words[static_cast<size_t>(w)];
      tok.pos = w % 3 == 0 ? "NOUN" : (w % 3 == 1 ? "VERB" : "ADJ");
      tok.morph = "_";
      tok.dep_label = t == 0 ? "root" : "dep";
      tok.dep_head = t == 0 ? 0 : 1;
      const double noise = cfg.noise_scale > 0.0 ? cfg.noise_scale * rng.normal() : 0.0;
      const double p =
          mistake_probability(L.difficulty[static_cast<size_t>(w)],
                              cfg.format_effects[static_cast<size_t>(fmt)], user.ability,
                              ex.meta.days, cfg.practice_gain, noise);
      const int y = rng.bernoulli(p) ? 1 : 0;
      labels.push_back(y);
      book.push_back(BookEntry{tok.instance_id, p, y, lang, split, user.id});
      ex.tokens.push_back(std::move(tok));
    }
    ex.labels = std::move(labels);
    return ex;
  }

  void run() {
    // Latents first: abilities are drawn once, independent of language.
    Rng latent_rng(mix64(cfg.seed, 0x1a7e17ULL));
    users.reserve(static_cast<size_t>(cfg.n_users));
    for (int i = 0; i < cfg.n_users; ++i)
      users.push_back(make_user("u" + pad_num(i, 4), latent_rng));
    for (int i = 0; i < cfg.cold_users; ++i) {
      cold_users.push_back(make_user("cold" + pad_num(i, 2), latent_rng));
      out.cold_user_ids.push_back(cold_users.back().id);
    }

    for (int k = 0; k < cfg.n_languages; ++k) {
      Rng lang_rng(mix64(cfg.seed, 0x7a9cULL, static_cast<uint64_t>(k)));
      LangLatents L;
      L.tag = "l" + std::to_string(k);
      L.words = make_words(k, cfg.words_per_language, lang_rng);
      L.difficulty.reserve(L.words.size());
      for (size_t i = 0; i < L.words.size(); ++i) L.difficulty.push_back(lang_rng.normal());
      const int held = static_cast<int>(
          std::ceil(cfg.heldout_word_fraction * static_cast<double>(cfg.words_per_language)));
      L.regular_words = std::max(1, cfg.words_per_language - held);
      langs.push_back(std::move(L));
    }

    for (int k = 0; k < cfg.n_languages; ++k) {
      SynthSplit split;
      const std::array<Dataset*, 3> sets{&split.train, &split.dev, &split.test};
      const std::array<int, 3> sizes{cfg.train_exercises, cfg.dev_exercises, cfg.test_exercises};
      for (int s = 0; s < 3; ++s) {
        Rng rng(mix64(cfg.seed, 0x5e7ULL + static_cast<uint64_t>(s), static_cast<uint64_t>(k)));
        Dataset& ds = *sets[static_cast<size_t>(s)];
        ds.language_tag = langs[static_cast<size_t>(k)].tag;
        for (int i = 0; i < sizes[static_cast<size_t>(s)]; ++i) {
          const UserInfo& u = users[rng.below(users.size())];
          ds.exercises.push_back(make_exercise(k, s, i, u, false, rng, out.bookkeeping));
        }
      }
      out.languages.push_back(std::move(split));
    }

    // Cold-start rows: aux-language training data plus held-out-word test
    // rows in language 0.
    for (size_t ci = 0; ci < cold_users.size(); ++ci) {
      const UserInfo& cu = cold_users[ci];
      Rng rng(mix64(cfg.seed, 0xc01dULL, ci));
      Dataset& aux_train = out.languages[static_cast<size_t>(cfg.cold_aux_language)].train;
      const int base_aux = static_cast<int>(aux_train.exercises.size());
      for (int i = 0; i < cfg.cold_aux_exercises; ++i)
        aux_train.exercises.push_back(make_exercise(cfg.cold_aux_language, 0, base_aux + i, cu,
                                                    false, rng, out.bookkeeping));
      Dataset& target_test = out.languages[0].test;
      const int base_test = static_cast<int>(target_test.exercises.size());
      for (int i = 0; i < cfg.cold_test_exercises; ++i)
        target_test.exercises.push_back(
            make_exercise(0, 2, base_test + i, cu, true, rng, out.bookkeeping));
    }
  }
};

}  // namespace

SynthOutput generate(const SynthConfig& config) {
  config.validate();
  Generator g(config);
  g.run();
  return g.out;
}

double bayes_auc(const std::vector<BookEntry>& entries) {
  ScoredLabels s;
  for (const BookEntry& e : entries) s.push(e.true_prob, e.label);
  return auc(s);
}

std::string serialize_bookkeeping(const std::vector<BookEntry>& entries) {
  std::string out;
  char buf[40];
  for (const BookEntry& e : entries) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), e.true_prob);
    out += e.instance_id;
    out += ' ';
    out.append(buf, res.ptr);
    out += '\n';
  }
  return out;
}

}  // namespace mtslam
