#include "mtslam/model.hpp"

#include <algorithm>
#include <cmath>

#include "mtslam/error.hpp"

namespace mtslam {

const char* to_string(MetaField f) {
  switch (f) {
    case MetaField::user: return "user";
    case MetaField::countries: return "countries";
    case MetaField::days: return "days";
    case MetaField::client: return "client";
    case MetaField::session: return "session";
    case MetaField::format: return "format";
    case MetaField::time: return "time";
  }
  return "?";
}

std::optional<MetaField> meta_field_from_string(const std::string& name) {
  for (int i = 0; i < kMetaFieldCount; ++i)
    if (name == to_string(static_cast<MetaField>(i))) return static_cast<MetaField>(i);
  return std::nullopt;
}

void ModelConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1) throw ConfigError("model dims must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("dropout_rate must be in [0,1)");
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must be in [0,1]");
  if (!any_context() && !use_meta)
    throw ConfigError("at least one context sub-encoder or the meta encoder must be enabled");
  if (mlp_hidden_layers < 1) throw ConfigError("mlp_hidden_layers must be >= 1");
  if (use_char_cnn_enc) {
    if (cnn_kernel_widths.empty() || cnn_filters_per_width < 1)
      throw ConfigError("char CNN needs at least one kernel width and one filter");
    for (int w : cnn_kernel_widths)
      if (w < 1) throw ConfigError("cnn kernel widths must be >= 1");
  }
}

int MTLModel::language_index(const std::string& tag) const {
  for (size_t i = 0; i < language_tags.size(); ++i)
    if (language_tags[i] == tag) return static_cast<int>(i);
  return -1;
}

namespace {

// Enum/bucket tables get one trailing PAD row used when the field is masked.
constexpr int kEnumValues = 4;

Tensor glorot(int rows, int cols, Rng& rng) {
  Tensor t(rows, cols);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& x : t.data) x = rng.uniform(-limit, limit);
  return t;
}

Tensor embedding_init(int rows, int cols, Rng& rng) {
  Tensor t(rows, cols);
  for (double& x : t.data) x = rng.uniform(-0.05, 0.05);
  return t;
}

MlpParams make_mlp(ParamStore& ps, const std::string& name, int in, int hidden, int out,
                   int hidden_layers, Rng& rng) {
  MlpParams mp;
  int cur = in;
  for (int i = 0; i < hidden_layers; ++i) {
    mp.w.push_back(ps.add(name + ".w" + std::to_string(i), glorot(cur, hidden, rng)));
    mp.b.push_back(ps.add(name + ".b" + std::to_string(i), Tensor(1, hidden)));
    cur = hidden;
  }
  mp.w.push_back(ps.add(name + ".out.w", glorot(cur, out, rng)));
  mp.b.push_back(ps.add(name + ".out.b", Tensor(1, out)));
  return mp;
}

LstmParams make_lstm(ParamStore& ps, const std::string& name, int in, int hidden, Rng& rng) {
  LstmParams lp;
  lp.wx = ps.add(name + ".wx", glorot(in, 4 * hidden, rng));
  lp.wh = ps.add(name + ".wh", glorot(hidden, 4 * hidden, rng));
  lp.b = ps.add(name + ".b", Tensor(1, 4 * hidden));
  return lp;
}

BiLstmParams make_bilstm(ParamStore& ps, const std::string& name, int in, int hidden, Rng& rng) {
  BiLstmParams bp;
  bp.fwd = make_lstm(ps, name + ".fwd", in, hidden, rng);
  bp.bwd = make_lstm(ps, name + ".bwd", in, hidden, rng);
  return bp;
}

struct LstmRefs {
  Var wx, wh, b;
};

LstmRefs refs(ParamCache& pc, const LstmParams& p) { return {pc[p.wx], pc[p.wh], pc[p.b]}; }

// Standard cell; zero initial state. Returns the full hidden sequence.
std::vector<Var> lstm_run(ParamCache& pc, const std::vector<Var>& xs, const LstmRefs& p, int H) {
  Tape& t = pc.tape();
  Var h = t.zeros(1, H);
  Var c = t.zeros(1, H);
  std::vector<Var> out;
  out.reserve(xs.size());
  for (const Var& x : xs) {
    Var gates = t.add(t.add(t.matmul(x, p.wx), t.matmul(h, p.wh)), p.b);
    Var i = t.sigmoid(t.slice_cols(gates, 0, H));
    Var f = t.sigmoid(t.slice_cols(gates, H, H));
    Var g = t.tanh(t.slice_cols(gates, 2 * H, H));
    Var o = t.sigmoid(t.slice_cols(gates, 3 * H, H));
    c = t.add(t.mul(f, c), t.mul(i, g));
    h = t.mul(o, t.tanh(c));
    out.push_back(h);
  }
  return out;
}

// Per-position concat of forward and reversed-backward states.
std::vector<Var> bilstm_run(ParamCache& pc, const std::vector<Var>& xs, const BiLstmParams& p,
                            int H) {
  Tape& t = pc.tape();
  const std::vector<Var> fw = lstm_run(pc, xs, refs(pc, p.fwd), H);
  std::vector<Var> rev(xs.rbegin(), xs.rend());
  const std::vector<Var> bw = lstm_run(pc, rev, refs(pc, p.bwd), H);
  std::vector<Var> out;
  out.reserve(xs.size());
  for (size_t i = 0; i < xs.size(); ++i)
    out.push_back(t.concat({fw[i], bw[xs.size() - 1 - i]}, 1));
  return out;
}

// Hidden relu layers (with dropout in train mode), then a linear output.
Var mlp_apply(ParamCache& pc, const MlpParams& mp, Var in, const ModelConfig& cfg, Mode mode,
              Rng& rng) {
  Tape& t = pc.tape();
  Var h = in;
  const size_t n_layers = mp.w.size();
  for (size_t i = 0; i + 1 < n_layers; ++i) {
    h = t.relu(t.add(t.matmul(h, pc[mp.w[i]]), pc[mp.b[i]]));
    h = t.dropout(h, cfg.dropout_rate, mode, rng);
  }
  return t.add(t.matmul(h, pc[mp.w[n_layers - 1]]), pc[mp.b[n_layers - 1]]);
}

}  // namespace

MTLModel init_model(const ModelConfig& config, const Vocabulary& vocab,
                    std::vector<std::string> language_tags, uint64_t seed) {
  config.validate();
  if (language_tags.empty()) throw ConfigError("init_model: need at least one language");
  MTLModel m;
  m.config = config;
  m.vocab = vocab;
  m.language_tags = std::move(language_tags);
  Rng rng(mix64(seed, 0x6d6f64ULL));
  const int E = config.embed_dim;
  const int H = config.hidden_dim;
  ParamStore& ps = m.params;

  if (config.use_meta) {
    m.meta.user_table = ps.add("meta.user", embedding_init(vocab.user_count(), E, rng), true);
    m.meta.country_table =
        ps.add("meta.country", embedding_init(vocab.country_count(), E, rng), true);
    m.meta.days_table =
        ps.add("meta.days", embedding_init(Vocabulary::kDaysBuckets + 1, E, rng), true);
    m.meta.client_table = ps.add("meta.client", embedding_init(kEnumValues + 1, E, rng), true);
    m.meta.session_table = ps.add("meta.session", embedding_init(kEnumValues + 1, E, rng), true);
    m.meta.format_table = ps.add("meta.format", embedding_init(kEnumValues + 1, E, rng), true);
    m.meta.time_table =
        ps.add("meta.time", embedding_init(Vocabulary::kTimeBuckets + 1, E, rng), true);
    m.meta.mlp_user = make_mlp(ps, "meta.mlp_user", 3 * E, H, H, config.mlp_hidden_layers, rng);
    m.meta.mlp_exercise =
        make_mlp(ps, "meta.mlp_exercise", 4 * E, H, H, config.mlp_hidden_layers, rng);
    m.meta.mlp_meta = make_mlp(ps, "meta.mlp_meta", 2 * H, H, H, config.mlp_hidden_layers, rng);
  }

  m.decoder.mlp = make_mlp(ps, "decoder", config.decoder_input_width(), H, 1,
                           config.mlp_hidden_layers, rng);

  for (size_t k = 0; k < m.language_tags.size(); ++k) {
    ContextEncoderParams cep;
    const std::string base = "lang" + std::to_string(k);
    if (config.use_word_enc) {
      cep.word_table = ps.add(base + ".word", embedding_init(vocab.word_count(), E, rng), true);
      cep.word_bilstm = make_bilstm(ps, base + ".word_bilstm", E, H, rng);
    }
    if (config.use_char_lstm_enc || config.use_char_cnn_enc)
      cep.char_table = ps.add(base + ".char", embedding_init(vocab.char_count(), E, rng), true);
    if (config.use_char_lstm_enc) {
      cep.char_lstm = make_lstm(ps, base + ".char_lstm", E, H, rng);
      cep.char_lstm_bilstm = make_bilstm(ps, base + ".char_lstm_bilstm", H, H, rng);
    }
    if (config.use_char_cnn_enc) {
      for (size_t wi = 0; wi < config.cnn_kernel_widths.size(); ++wi) {
        const int w = config.cnn_kernel_widths[wi];
        cep.cnn_filters.push_back(ps.add(base + ".cnn.w" + std::to_string(w),
                                         glorot(w * E, config.cnn_filters_per_width, rng)));
        cep.cnn_biases.push_back(ps.add(base + ".cnn.b" + std::to_string(w),
                                        Tensor(1, config.cnn_filters_per_width)));
      }
      cep.char_cnn_bilstm = make_bilstm(ps, base + ".char_cnn_bilstm", config.cnn_total_filters(),
                                        H, rng);
    }
    if (config.any_context()) {
      cep.ctx_w = ps.add(base + ".ctx.w", glorot(config.context_input_width(), H, rng));
      cep.ctx_b = ps.add(base + ".ctx.b", Tensor(1, H));
    }
    m.contexts.push_back(cep);
  }
  return m;
}

Var meta_encode(ParamCache& pc, const MTLModel& model, const EncodedExercise& ex, Mode mode,
                Rng& rng) {
  const ModelConfig& cfg = model.config;
  if (!cfg.use_meta) throw ContractError("meta_encode: meta encoder disabled");
  Tape& t = pc.tape();
  const MetaEncoderParams& mp = model.meta;

  auto table_lookup = [&](int table, int row, MetaField field, int pad_row) {
    const int r = cfg.is_masked(field) ? pad_row : row;
    return t.lookup(pc[table], r);
  };

  const Var user = table_lookup(mp.user_table, ex.user, MetaField::user, Vocabulary::kPad);
  Var countries;
  if (cfg.is_masked(MetaField::countries) || ex.countries.empty()) {
    countries = t.lookup(pc[mp.country_table], Vocabulary::kPad);
  } else {
    Var acc = t.lookup(pc[mp.country_table], ex.countries[0]);
    for (size_t i = 1; i < ex.countries.size(); ++i)
      acc = t.add(acc, t.lookup(pc[mp.country_table], ex.countries[i]));
    countries = ex.countries.size() > 1
                    ? t.scale(acc, 1.0 / static_cast<double>(ex.countries.size()))
                    : acc;
  }
  const Var days =
      table_lookup(mp.days_table, ex.days_bucket, MetaField::days, Vocabulary::kDaysBuckets);
  const Var client = table_lookup(mp.client_table, ex.client, MetaField::client, kEnumValues);
  const Var session = table_lookup(mp.session_table, ex.session, MetaField::session, kEnumValues);
  const Var format = table_lookup(mp.format_table, ex.format, MetaField::format, kEnumValues);
  const Var time =
      table_lookup(mp.time_table, ex.time_bucket, MetaField::time, Vocabulary::kTimeBuckets);

  const Var s = t.concat({user, countries, days}, 1);
  const Var r_user = mlp_apply(pc, mp.mlp_user, s, cfg, mode, rng);
  const Var tt = t.concat({format, session, client, time}, 1);
  const Var r_exercise = mlp_apply(pc, mp.mlp_exercise, tt, cfg, mode, rng);
  return mlp_apply(pc, mp.mlp_meta, t.concat({r_user, r_exercise}, 1), cfg, mode, rng);
}

std::vector<Var> word_context_encode(ParamCache& pc, const MTLModel& model, int language,
                                     const std::vector<int>& word_ids, Mode mode) {
  (void)mode;
  if (word_ids.empty()) throw InputError("word_context_encode: empty sequence");
  const ContextEncoderParams& cep = model.contexts[static_cast<size_t>(language)];
  Tape& t = pc.tape();
  std::vector<Var> xs;
  xs.reserve(word_ids.size());
  for (int w : word_ids) xs.push_back(t.lookup(pc[cep.word_table], w));
  return bilstm_run(pc, xs, cep.word_bilstm, model.config.hidden_dim);
}

namespace {

std::vector<Var> char_embed(ParamCache& pc, const ContextEncoderParams& cep,
                            const std::vector<int>& chars) {
  if (chars.empty()) throw InputError("char encoder: word with no characters");
  std::vector<Var> xs;
  xs.reserve(chars.size());
  for (int c : chars) xs.push_back(pc.tape().lookup(pc[cep.char_table], c));
  return xs;
}

}  // namespace

std::vector<Var> char_lstm_encode(ParamCache& pc, const MTLModel& model, int language,
                                  const std::vector<std::vector<int>>& char_ids, Mode mode) {
  (void)mode;
  const ContextEncoderParams& cep = model.contexts[static_cast<size_t>(language)];
  const int H = model.config.hidden_dim;
  std::vector<Var> word_reprs;
  word_reprs.reserve(char_ids.size());
  const LstmRefs lstm = refs(pc, cep.char_lstm);
  for (const auto& chars : char_ids) {
    const std::vector<Var> xs = char_embed(pc, cep, chars);
    word_reprs.push_back(lstm_run(pc, xs, lstm, H).back());
  }
  return bilstm_run(pc, word_reprs, cep.char_lstm_bilstm, H);
}

std::vector<Var> char_cnn_encode(ParamCache& pc, const MTLModel& model, int language,
                                 const std::vector<std::vector<int>>& char_ids, Mode mode) {
  (void)mode;
  const ContextEncoderParams& cep = model.contexts[static_cast<size_t>(language)];
  const ModelConfig& cfg = model.config;
  Tape& t = pc.tape();
  const int w_max = *std::max_element(cfg.cnn_kernel_widths.begin(), cfg.cnn_kernel_widths.end());

  std::vector<Var> word_reprs;
  word_reprs.reserve(char_ids.size());
  for (const auto& chars : char_ids) {
    std::vector<Var> rows = char_embed(pc, cep, chars);
    const int L = static_cast<int>(rows.size());
    if (L < w_max) {
      // zero-pad left/right so the widest kernel always fits
      const int left = (w_max - L) / 2;
      const int right = w_max - L - left;
      std::vector<Var> padded;
      if (left > 0) padded.push_back(t.zeros(left, cfg.embed_dim));
      for (const Var& r : rows) padded.push_back(r);
      if (right > 0) padded.push_back(t.zeros(right, cfg.embed_dim));
      rows = std::move(padded);
    }
    const Var stacked = t.concat(rows, 0);
    std::vector<Var> pooled;
    pooled.reserve(cfg.cnn_kernel_widths.size());
    for (size_t wi = 0; wi < cfg.cnn_kernel_widths.size(); ++wi) {
      const Var conv = t.conv1d(stacked, pc[cep.cnn_filters[wi]], pc[cep.cnn_biases[wi]],
                                cfg.cnn_kernel_widths[wi]);
      pooled.push_back(t.max_over_time(conv));
    }
    word_reprs.push_back(pooled.size() == 1 ? pooled[0] : t.concat(pooled, 1));
  }
  return bilstm_run(pc, word_reprs, cep.char_cnn_bilstm, cfg.hidden_dim);
}

std::vector<Var> context_combine(ParamCache& pc, const MTLModel& model, int language,
                                 const std::vector<Var>& word_out,
                                 const std::vector<Var>& char_lstm_out,
                                 const std::vector<Var>& char_cnn_out, Mode mode, Rng& rng) {
  const ModelConfig& cfg = model.config;
  const ContextEncoderParams& cep = model.contexts[static_cast<size_t>(language)];
  Tape& t = pc.tape();
  size_t l = 0;
  for (const auto* v : {&word_out, &char_lstm_out, &char_cnn_out})
    if (!v->empty()) {
      if (l == 0) l = v->size();
      if (v->size() != l) throw ContractError("context_combine: sub-encoder lengths disagree");
    }
  if (l == 0) throw ContractError("context_combine: no enabled sub-encoder output");
  std::vector<Var> out;
  out.reserve(l);
  for (size_t i = 0; i < l; ++i) {
    std::vector<Var> parts;
    if (cfg.use_word_enc) parts.push_back(word_out[i]);
    if (cfg.use_char_lstm_enc) parts.push_back(char_lstm_out[i]);
    if (cfg.use_char_cnn_enc) parts.push_back(char_cnn_out[i]);
    Var in = parts.size() == 1 ? parts[0] : t.concat(parts, 1);
    in = t.dropout(in, cfg.dropout_rate, mode, rng);
    out.push_back(t.relu(t.add(t.matmul(in, pc[cep.ctx_w]), pc[cep.ctx_b])));
  }
  return out;
}

std::vector<Var> forward_exercise_logits(ParamCache& pc, const MTLModel& model,
                                         const EncodedExercise& ex, Mode mode, Rng& rng) {
  const ModelConfig& cfg = model.config;
  if (ex.language < 0 || ex.language >= model.n_languages())
    throw ContractError("forward: language index " + std::to_string(ex.language) +
                        " out of range for " + std::to_string(model.n_languages()) + " languages");
  if (ex.length() < 1) throw InputError("forward: exercise with no tokens");
  Tape& t = pc.tape();

  std::vector<Var> r_context;
  if (cfg.any_context()) {
    std::vector<Var> word_out, char_lstm_out, char_cnn_out;
    if (cfg.use_word_enc) word_out = word_context_encode(pc, model, ex.language, ex.word_ids, mode);
    if (cfg.use_char_lstm_enc)
      char_lstm_out = char_lstm_encode(pc, model, ex.language, ex.char_ids, mode);
    if (cfg.use_char_cnn_enc)
      char_cnn_out = char_cnn_encode(pc, model, ex.language, ex.char_ids, mode);
    r_context =
        context_combine(pc, model, ex.language, word_out, char_lstm_out, char_cnn_out, mode, rng);
  }

  Var r_meta;
  if (cfg.use_meta) r_meta = meta_encode(pc, model, ex, mode, rng);

  std::vector<Var> logits;
  logits.reserve(static_cast<size_t>(ex.length()));
  for (int i = 0; i < ex.length(); ++i) {
    Var in;
    if (cfg.any_context() && cfg.use_meta)
      in = t.concat({r_context[static_cast<size_t>(i)], r_meta}, 1);
    else if (cfg.any_context())
      in = r_context[static_cast<size_t>(i)];
    else
      in = r_meta;
    logits.push_back(mlp_apply(pc, model.decoder.mlp, in, cfg, mode, rng));
  }
  return logits;
}

std::vector<double> forward_exercise(const MTLModel& model, const EncodedExercise& ex, Mode mode,
                                     Rng& rng) {
  Tape tape;
  ParamCache pc(tape, model.params);
  const std::vector<Var> logits = forward_exercise_logits(pc, model, ex, mode, rng);
  std::vector<double> probs;
  probs.reserve(logits.size());
  for (const Var& z : logits) {
    double p = 1.0 / (1.0 + std::exp(-tape.value(z).data[0]));
    // keep the open-interval contract even for saturated logits
    p = std::min(1.0 - 1e-15, std::max(1e-15, p));
    probs.push_back(p);
  }
  return probs;
}

Var exercise_loss_sum(ParamCache& pc, const MTLModel& model, const EncodedExercise& ex, Mode mode,
                      Rng& rng) {
  if (!ex.labels) throw InputError("loss: exercise has no labels");
  Tape& t = pc.tape();
  const std::vector<Var> logits = forward_exercise_logits(pc, model, ex, mode, rng);
  const double alpha = model.config.alpha;
  Var total;
  for (size_t i = 0; i < logits.size(); ++i) {
    const int y = (*ex.labels)[i];
    // -(alpha*y*log p + (1-alpha)*(1-y)*log(1-p)) via log-sigmoid on the logit
    Var term = y == 1 ? t.scale(t.logsig(logits[i]), -alpha)
                      : t.scale(t.logsig(t.neg(logits[i])), -(1.0 - alpha));
    total = total.valid() ? t.add(total, term) : term;
  }
  return total;
}

double loss_weighted_bce(const std::vector<double>& probs, const std::vector<int>& labels,
                         double alpha) {
  if (probs.empty() || probs.size() != labels.size())
    throw ContractError("loss_weighted_bce: need equal-length non-empty probs and labels");
  double sum = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p > 0.0 && p < 1.0))
      throw ContractError("loss_weighted_bce: probability outside (0,1)");
    if (labels[i] == 1)
      sum += alpha * std::log(p);
    else
      sum += (1.0 - alpha) * std::log(1.0 - p);
  }
  return -sum / static_cast<double>(probs.size());
}

double multitask_loss(const std::vector<double>& per_language_losses) {
  double s = 0.0;
  for (double x : per_language_losses) s += x;
  return s;
}

}  // namespace mtslam
