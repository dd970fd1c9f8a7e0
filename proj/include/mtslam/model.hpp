#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mtslam/params.hpp"
#include "mtslam/rng.hpp"
#include "mtslam/tape.hpp"
#include "mtslam/vocab.hpp"

namespace mtslam {

enum class MetaField : int { user = 0, countries, days, client, session, format, time };
constexpr int kMetaFieldCount = 7;
const char* to_string(MetaField f);
std::optional<MetaField> meta_field_from_string(const std::string& name);

struct ModelConfig {
  int embed_dim = 150;
  int hidden_dim = 150;
  double dropout_rate = 0.5;
  double alpha = 0.5;  // class-balance weight in the per-task loss
  std::vector<int> cnn_kernel_widths = {2, 3, 4};
  int cnn_filters_per_width = 50;
  int mlp_hidden_layers = 1;
  bool use_meta = true;
  bool use_word_enc = true;
  bool use_char_lstm_enc = true;
  bool use_char_cnn_enc = true;
  std::array<bool, kMetaFieldCount> masked{};  // masked fields read their PAD embedding

  bool is_masked(MetaField f) const { return masked[static_cast<size_t>(f)]; }
  bool any_context() const { return use_word_enc || use_char_lstm_enc || use_char_cnn_enc; }
  int cnn_total_filters() const {
    return static_cast<int>(cnn_kernel_widths.size()) * cnn_filters_per_width;
  }
  int context_input_width() const {
    int w = 0;
    if (use_word_enc) w += 2 * hidden_dim;
    if (use_char_lstm_enc) w += 2 * hidden_dim;
    if (use_char_cnn_enc) w += 2 * hidden_dim;
    return w;
  }
  int decoder_input_width() const {
    return (any_context() ? hidden_dim : 0) + (use_meta ? hidden_dim : 0);
  }
  void validate() const;
};

// Multi-layer perceptron: `w.size()-1` hidden relu layers plus a linear
// output layer.
struct MlpParams {
  std::vector<int> w;
  std::vector<int> b;
};

// Fused-gate LSTM cell: wx [in x 4H], wh [H x 4H], b [1 x 4H];
// gate order i, f, g, o.
struct LstmParams {
  int wx = -1, wh = -1, b = -1;
};

struct BiLstmParams {
  LstmParams fwd, bwd;
};

struct MetaEncoderParams {
  int user_table = -1, country_table = -1, days_table = -1, client_table = -1,
      session_table = -1, format_table = -1, time_table = -1;
  MlpParams mlp_user, mlp_exercise, mlp_meta;
};

struct ContextEncoderParams {
  int word_table = -1;
  BiLstmParams word_bilstm;
  int char_table = -1;
  LstmParams char_lstm;
  BiLstmParams char_lstm_bilstm;
  std::vector<int> cnn_filters;  // one per kernel width
  std::vector<int> cnn_biases;
  BiLstmParams char_cnn_bilstm;
  int ctx_w = -1, ctx_b = -1;  // single-layer context MLP
};

struct DecoderParams {
  MlpParams mlp;  // hidden relu layers, then a scalar output squashed by sigmoid
};

// One shared meta encoder, one shared decoder, one context encoder per
// language. All parameters live in a single ParamStore; the per-language
// structs only hold parameter ids, so "shared" is literal.
struct MTLModel {
  ModelConfig config;
  Vocabulary vocab;
  std::vector<std::string> language_tags;
  ParamStore params;
  MetaEncoderParams meta;
  std::vector<ContextEncoderParams> contexts;
  DecoderParams decoder;

  int n_languages() const { return static_cast<int>(contexts.size()); }
  int language_index(const std::string& tag) const;  // -1 when unknown
};

MTLModel init_model(const ModelConfig& config, const Vocabulary& vocab,
                    std::vector<std::string> language_tags, uint64_t seed);

// Lazily materializes one tape leaf per parameter so a multi-exercise pass
// shares leaves.
class ParamCache {
 public:
  ParamCache(Tape& tape, const ParamStore& store)
      : tape_(tape), store_(store), vars_(static_cast<size_t>(store.count())) {}

  Var operator[](int id) {
    Var& v = vars_[static_cast<size_t>(id)];
    if (!v.valid()) v = store_.use(tape_, id);
    return v;
  }
  Tape& tape() { return tape_; }

 private:
  Tape& tape_;
  const ParamStore& store_;
  std::vector<Var> vars_;
};

// ---- encoder/decoder pieces (exposed for tests and ablation work) ----

// Eq.-1-style shared meta representation, a [1 x hidden] row.
Var meta_encode(ParamCache& pc, const MTLModel& model, const EncodedExercise& ex, Mode mode,
                Rng& rng);

// Per-token word-level bidirectional recurrent states, each [1 x 2*hidden].
std::vector<Var> word_context_encode(ParamCache& pc, const MTLModel& model, int language,
                                     const std::vector<int>& word_ids, Mode mode);

// Char-level recurrent sub-encoder output per token, each [1 x 2*hidden].
std::vector<Var> char_lstm_encode(ParamCache& pc, const MTLModel& model, int language,
                                  const std::vector<std::vector<int>>& char_ids, Mode mode);

// Char-level convolutional sub-encoder output per token, each [1 x 2*hidden].
std::vector<Var> char_cnn_encode(ParamCache& pc, const MTLModel& model, int language,
                                 const std::vector<std::vector<int>>& char_ids, Mode mode);

// Combines the enabled sub-encoder outputs into per-token context rows
// [1 x hidden] through the single-layer context MLP.
std::vector<Var> context_combine(ParamCache& pc, const MTLModel& model, int language,
                                 const std::vector<Var>& word_out,
                                 const std::vector<Var>& char_lstm_out,
                                 const std::vector<Var>& char_cnn_out, Mode mode, Rng& rng);

// Pre-sigmoid decoder outputs, one [1 x 1] per token.
std::vector<Var> forward_exercise_logits(ParamCache& pc, const MTLModel& model,
                                         const EncodedExercise& ex, Mode mode, Rng& rng);

// Mistake probabilities p_t in (0,1); plain values, no tape needed by the
// caller. Deterministic in eval mode.
std::vector<double> forward_exercise(const MTLModel& model, const EncodedExercise& ex, Mode mode,
                                     Rng& rng);

// Unnormalized per-exercise loss: sum over tokens of
// -(alpha*y*log p + (1-alpha)*(1-y)*log(1-p)), built on the logit path so
// saturated probabilities cannot produce log(0).
Var exercise_loss_sum(ParamCache& pc, const MTLModel& model, const EncodedExercise& ex, Mode mode,
                      Rng& rng);

// ---- value-level loss helpers ----

// Per-task weighted cross entropy, normalized by the token count of the
// slice it is called on.
double loss_weighted_bce(const std::vector<double>& probs, const std::vector<int>& labels,
                         double alpha);

// Unweighted sum over the languages present.
double multitask_loss(const std::vector<double>& per_language_losses);

}  // namespace mtslam
