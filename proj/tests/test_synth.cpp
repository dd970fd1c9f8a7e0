#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "mtslam/metrics.hpp"
#include "mtslam/synth.hpp"

using namespace mtslam;

namespace {

SynthConfig small_config() {
  SynthConfig c;
  c.n_languages = 2;
  c.n_users = 30;
  c.words_per_language = 40;
  c.train_exercises = 200;
  c.dev_exercises = 50;
  c.test_exercises = 60;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("generation is byte-identical under the same seed") {
  const SynthOutput a = generate(small_config());
  const SynthOutput b = generate(small_config());
  REQUIRE(a.languages.size() == b.languages.size());
  for (size_t k = 0; k < a.languages.size(); ++k) {
    CHECK(serialize_corpus(a.languages[k].train) == serialize_corpus(b.languages[k].train));
    CHECK(serialize_corpus(a.languages[k].dev) == serialize_corpus(b.languages[k].dev));
    CHECK(serialize_corpus(a.languages[k].test) == serialize_corpus(b.languages[k].test));
  }
  CHECK(serialize_bookkeeping(a.bookkeeping) == serialize_bookkeeping(b.bookkeeping));

  SynthConfig other = small_config();
  other.seed = 6;
  const SynthOutput c = generate(other);
  CHECK(serialize_corpus(a.languages[0].train) != serialize_corpus(c.languages[0].train));
}

TEST_CASE("mistake probability is monotone in ability and bounded") {
  double last = 1.0;
  for (double ability : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
    const double p = mistake_probability(0.5, 0.2, ability, 10.0, 0.1);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(p < last);
    last = p;
  }
  // practice lowers the mistake rate
  CHECK(mistake_probability(0, 0, 0, 50.0, 0.2) < mistake_probability(0, 0, 0, 0.0, 0.2));
}

TEST_CASE("empirical mistake rate sits in the 3-sigma binomial band of the true mean") {
  SynthConfig c = small_config();
  c.train_exercises = 12000;  // ~36k train tokens in language 0
  c.tokens_min = 3;
  c.tokens_max = 3;
  const SynthOutput out = generate(c);
  double mean_p = 0.0, var = 0.0;
  int64_t n = 0, mistakes = 0;
  for (const BookEntry& e : out.bookkeeping) {
    if (e.language != 0 || e.split != 0) continue;
    mean_p += e.true_prob;
    var += e.true_prob * (1.0 - e.true_prob);
    mistakes += e.label;
    ++n;
  }
  REQUIRE(n > 100000 / 3);
  mean_p /= static_cast<double>(n);
  const double sigma = std::sqrt(var) / static_cast<double>(n);
  CHECK(std::abs(static_cast<double>(mistakes) / static_cast<double>(n) - mean_p) < 3.0 * sigma);
}

TEST_CASE("a user's ability is identical in every language's generation path") {
  SynthConfig c = small_config();
  c.cold_users = 3;
  c.heldout_word_fraction = 0.2;
  const SynthOutput out = generate(c);
  // single ability table: every exercise of a user in any language shares it
  CHECK(out.abilities.size() == static_cast<size_t>(c.n_users + c.cold_users));
  // cold users appear in aux train and target test only
  std::unordered_set<std::string> cold(out.cold_user_ids.begin(), out.cold_user_ids.end());
  for (const Exercise& ex : out.languages[0].train.exercises) CHECK(!cold.count(ex.meta.user));
  for (const Exercise& ex : out.languages[0].dev.exercises) CHECK(!cold.count(ex.meta.user));
  int cold_test_rows = 0;
  for (const Exercise& ex : out.languages[0].test.exercises)
    if (cold.count(ex.meta.user)) ++cold_test_rows;
  CHECK(cold_test_rows == c.cold_users * c.cold_test_exercises);
  int cold_aux = 0;
  for (const Exercise& ex : out.languages[1].train.exercises)
    if (cold.count(ex.meta.user)) ++cold_aux;
  CHECK(cold_aux == c.cold_users * c.cold_aux_exercises);
}

TEST_CASE("cold-start test rows use only held-out words, unseen in any training row") {
  SynthConfig c = small_config();
  c.cold_users = 2;
  c.heldout_word_fraction = 0.25;
  const SynthOutput out = generate(c);
  std::unordered_set<std::string> cold(out.cold_user_ids.begin(), out.cold_user_ids.end());
  std::unordered_set<std::string> train_words;
  for (const auto& lang : out.languages)
    for (const Exercise& ex : lang.train.exercises)
      for (const Token& t : ex.tokens) train_words.insert(t.surface);
  int checked = 0;
  for (const Exercise& ex : out.languages[0].test.exercises) {
    if (!cold.count(ex.meta.user)) continue;
    for (const Token& t : ex.tokens) {
      CHECK(!train_words.count(t.surface));
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("generated corpora parse and round-trip through the data layer") {
  const SynthOutput out = generate(small_config());
  for (const auto& lang : out.languages) {
    for (const Dataset* ds : {&lang.train, &lang.dev, &lang.test}) {
      const std::string text = serialize_corpus(*ds);
      std::istringstream in(text);
      const Dataset back = parse_corpus(in, ds->language_tag, true);
      CHECK(back == *ds);
    }
  }
}

TEST_CASE("bayes_auc matches metrics::auc on the same pairs and behaves at the edges") {
  const SynthOutput out = generate(small_config());
  std::vector<BookEntry> test_entries;
  for (const BookEntry& e : out.bookkeeping)
    if (e.split == 2 && e.language == 0) test_entries.push_back(e);
  ScoredLabels s;
  for (const BookEntry& e : test_entries) s.push(e.true_prob, e.label);
  CHECK(bayes_auc(test_entries) == auc(s));
  CHECK(bayes_auc(test_entries) > 0.5);

  // constant true probability carries no ranking information
  std::vector<BookEntry> flat;
  for (int i = 0; i < 100; ++i)
    flat.push_back(BookEntry{"x" + std::to_string(i), 0.4, i % 3 == 0 ? 1 : 0, 0, 0, "u"});
  CHECK(bayes_auc(flat) == doctest::Approx(0.5));
}

TEST_CASE("zero noise with distinct probabilities matches an all-pairs count") {
  std::vector<BookEntry> entries;
  // hand-built: probs 0.9, 0.8, 0.3, 0.2 with labels 1,0,1,0
  entries.push_back({"a", 0.9, 1, 0, 0, "u"});
  entries.push_back({"b", 0.8, 0, 0, 0, "u"});
  entries.push_back({"c", 0.3, 1, 0, 0, "u"});
  entries.push_back({"d", 0.2, 0, 0, 0, "u"});
  CHECK(bayes_auc(entries) == doctest::Approx(0.75));
}

TEST_CASE("bookkeeping serialization format") {
  std::vector<BookEntry> entries;
  entries.push_back({"ex1t1", 0.25, 0, 0, 0, "u"});
  entries.push_back({"ex1t2", 0.5, 1, 0, 0, "u"});
  CHECK(serialize_bookkeeping(entries) == "ex1t1 0.25\nex1t2 0.5\n");
}

TEST_CASE("config validation rejects inconsistent cold-start setups") {
  SynthConfig c = small_config();
  c.cold_users = 2;
  c.heldout_word_fraction = 0.0;
  CHECK_THROWS_AS(generate(c), ConfigError);
  c.heldout_word_fraction = 0.2;
  c.n_languages = 1;
  CHECK_THROWS_AS(generate(c), ConfigError);
  SynthConfig bad = small_config();
  bad.tokens_min = 3;
  bad.tokens_max = 2;
  CHECK_THROWS_AS(generate(bad), ConfigError);
}
