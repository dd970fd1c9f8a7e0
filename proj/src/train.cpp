#include "mtslam/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "mtslam/error.hpp"
#include "mtslam/io_util.hpp"
#include "mtslam/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mtslam {

namespace {

// Exercises per backward pass. Fixed (never derived from the thread count)
// so gradient accumulation order, and therefore training, is bit-identical
// for any parallelism level.
constexpr int kGroupSize = 8;

struct FlatExercise {
  const EncodedExercise* ex;
  int flat_index;
};

}  // namespace

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("train: lr must be > 0");
  if (per_language_quota < 1) throw ConfigError("train: quota must be >= 1");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
  if (grad_clip_norm <= 0.0) throw ConfigError("train: grad_clip_norm must be > 0");
}

double train_step(MTLModel& model, const MultiBatch& batch, const TrainConfig& cfg,
                  TrainState& state, std::vector<Tensor>& grad_acc,
                  std::vector<double>* lang_term_sums, std::vector<int64_t>* lang_tokens) {
  const int n_langs = model.n_languages();
  std::vector<int64_t> tokens(static_cast<size_t>(n_langs), 0);
  std::vector<FlatExercise> flat;
  for (int k = 0; k < n_langs && k < static_cast<int>(batch.per_language.size()); ++k) {
    for (const EncodedExercise& e : batch.per_language[static_cast<size_t>(k)]) {
      if (e.language != k) throw ContractError("train_step: exercise filed under wrong language");
      if (!e.labels) throw InputError("train_step: unlabeled exercise " + e.exercise_id);
      tokens[static_cast<size_t>(k)] += e.length();
      flat.push_back({&e, static_cast<int>(flat.size())});
    }
  }
  if (flat.empty()) throw InputError("train_step: empty batch");

  const int n_groups = (static_cast<int>(flat.size()) + kGroupSize - 1) / kGroupSize;
  std::vector<GradBuffer> group_grads;
  group_grads.reserve(static_cast<size_t>(n_groups));
  for (int g = 0; g < n_groups; ++g) group_grads.emplace_back(model.params.count());
  std::vector<std::vector<double>> group_term_sums(
      static_cast<size_t>(n_groups), std::vector<double>(static_cast<size_t>(n_langs), 0.0));

  const uint64_t step_seed = mix64(cfg.seed, 0x57e9ULL, static_cast<uint64_t>(state.global_step));

  auto run_group = [&](int g) {
    Tape tape;
    ParamCache pc(tape, model.params);
    Var loss;
    const int lo = g * kGroupSize;
    const int hi = std::min<int>(static_cast<int>(flat.size()), lo + kGroupSize);
    for (int i = lo; i < hi; ++i) {
      const EncodedExercise& e = *flat[static_cast<size_t>(i)].ex;
      Rng ex_rng(mix64(step_seed, static_cast<uint64_t>(i)));
      Var sum = exercise_loss_sum(pc, model, e, Mode::train, ex_rng);
      group_term_sums[static_cast<size_t>(g)][static_cast<size_t>(e.language)] +=
          tape.value(sum).data[0];
      Var part = tape.scale(sum, 1.0 / static_cast<double>(tokens[static_cast<size_t>(e.language)]));
      loss = loss.valid() ? tape.add(loss, part) : part;
    }
    tape.backward(loss, &group_grads[static_cast<size_t>(g)]);
  };

#ifdef _OPENMP
  if (kernels::parallel_ok() && n_groups > 1) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int g = 0; g < n_groups; ++g) run_group(g);
  } else {
    for (int g = 0; g < n_groups; ++g) run_group(g);
  }
#else
  for (int g = 0; g < n_groups; ++g) run_group(g);
#endif

  zero_grads(grad_acc);
  for (int g = 0; g < n_groups; ++g) group_grads[static_cast<size_t>(g)].merge_into(grad_acc);
  const double norm = clip_global_norm(grad_acc, cfg.grad_clip_norm);
  adam_step(model.params, grad_acc, state.adam);
  state.global_step += 1;

  if (lang_term_sums) {
    lang_term_sums->assign(static_cast<size_t>(n_langs), 0.0);
    for (int g = 0; g < n_groups; ++g)
      for (int k = 0; k < n_langs; ++k)
        (*lang_term_sums)[static_cast<size_t>(k)] +=
            group_term_sums[static_cast<size_t>(g)][static_cast<size_t>(k)];
  }
  if (lang_tokens) *lang_tokens = tokens;
  return norm;
}

ScoredLabels score_dataset(const MTLModel& model, const std::vector<EncodedExercise>& data) {
  std::vector<int> offsets(data.size() + 1, 0);
  for (size_t i = 0; i < data.size(); ++i) {
    if (!data[i].labels) throw InputError("evaluate: unlabeled exercise " + data[i].exercise_id);
    offsets[i + 1] = offsets[i] + data[i].length();
  }
  ScoredLabels out;
  out.scores.resize(static_cast<size_t>(offsets.back()));
  out.labels.resize(static_cast<size_t>(offsets.back()));

  auto run = [&](size_t i) {
    Rng rng(0);  // unused in eval mode
    const auto probs = forward_exercise(model, data[i], Mode::eval, rng);
    for (int t = 0; t < data[i].length(); ++t) {
      out.scores[static_cast<size_t>(offsets[i] + t)] = probs[static_cast<size_t>(t)];
      out.labels[static_cast<size_t>(offsets[i] + t)] = (*data[i].labels)[static_cast<size_t>(t)];
    }
  };
#ifdef _OPENMP
  if (kernels::parallel_ok() && data.size() > 16) {
#pragma omp parallel for schedule(dynamic, 16)
    for (size_t i = 0; i < data.size(); ++i) run(i);
  } else {
    for (size_t i = 0; i < data.size(); ++i) run(i);
  }
#else
  for (size_t i = 0; i < data.size(); ++i) run(i);
#endif
  return out;
}

EvalResult evaluate(const MTLModel& model, const std::vector<EncodedExercise>& data) {
  if (data.empty()) throw InputError("evaluate: empty dataset");
  const ScoredLabels scored = score_dataset(model, data);
  EvalResult r;
  r.n_tokens = static_cast<int64_t>(scored.size());
  r.auc = auc(scored);
  r.f1 = f1_at(scored, 0.5).f1;
  return r;
}

TrainResult train(const MTLModel& model, const EncodedSets& train_sets,
                  const EncodedSets& dev_sets, const TrainConfig& cfg, const TrainState* resume) {
  cfg.validate();
  if (static_cast<int>(train_sets.size()) != model.n_languages() ||
      dev_sets.size() != train_sets.size())
    throw InputError("train: train/dev sets must align with the model's languages");
  int64_t total = 0;
  for (const auto& s : train_sets) total += static_cast<int64_t>(s.size());
  if (total == 0) throw InputError("train: no training exercises");

  TrainResult res;
  res.final_model = model;
  MTLModel& cur = res.final_model;
  cur.config.alpha = cfg.alpha;  // the training config owns the loss weight
  if (resume) {
    res.state = *resume;
  } else {
    res.state.adam = AdamState::init(cur.params, AdamConfig{.lr = cfg.lr});
    res.state.global_step = 0;
    res.state.next_epoch = 0;
  }

  std::vector<Tensor> grad_acc = make_grad_accumulator(cur.params);
  res.best_model = cur;
  double best_auc = -1.0;
  int evals_since_best = 0;

  for (int epoch = res.state.next_epoch; epoch < cfg.max_epochs; ++epoch) {
    const auto batches =
        make_batches(train_sets, cfg.per_language_quota, mix64(cfg.seed, 0xe70cULL, epoch), true);
    std::vector<double> term_sums(train_sets.size(), 0.0);
    std::vector<int64_t> tok_counts(train_sets.size(), 0);
    for (const MultiBatch& b : batches) {
      std::vector<double> bt;
      std::vector<int64_t> bn;
      train_step(cur, b, cfg, res.state, grad_acc, &bt, &bn);
      for (size_t k = 0; k < train_sets.size(); ++k) {
        term_sums[k] += bt[k];
        tok_counts[k] += bn[k];
      }
    }
    res.state.next_epoch = epoch + 1;

    EpochRow row;
    row.epoch = epoch;
    for (size_t k = 0; k < train_sets.size(); ++k)
      row.train_loss.push_back(tok_counts[k] > 0 ? term_sums[k] / static_cast<double>(tok_counts[k])
                                                 : 0.0);

    if ((epoch + 1) % cfg.eval_every == 0) {
      double auc_sum = 0.0;
      int auc_n = 0;
      for (size_t k = 0; k < dev_sets.size(); ++k) {
        if (dev_sets[k].empty()) {
          row.dev_auc.push_back(0.0);
          row.dev_f1.push_back(0.0);
          continue;
        }
        const EvalResult ev = evaluate(cur, dev_sets[k]);
        row.dev_auc.push_back(ev.auc);
        row.dev_f1.push_back(ev.f1);
        auc_sum += ev.auc;
        ++auc_n;
      }
      row.mean_dev_auc = auc_n > 0 ? auc_sum / auc_n : 0.0;
      res.history.epochs.push_back(row);

      if (row.mean_dev_auc > best_auc) {
        best_auc = row.mean_dev_auc;
        res.best_model = cur;
        res.history.best_epoch = epoch;
        evals_since_best = 0;
      } else {
        ++evals_since_best;
        if (evals_since_best >= cfg.patience) break;
      }
    } else {
      res.history.epochs.push_back(row);
    }
  }
  if (res.history.best_epoch < 0) res.best_model = cur;  // no dev evaluation ran
  return res;
}

void predict_to_file(const MTLModel& model, const std::vector<EncodedExercise>& data,
                     std::ostream& out) {
  Rng rng(0);
  for (const EncodedExercise& e : data) {
    const auto probs = forward_exercise(model, e, Mode::eval, rng);
    char buf[64];
    for (int t = 0; t < e.length(); ++t) {
      std::snprintf(buf, sizeof(buf), "%.6f", probs[static_cast<size_t>(t)]);
      out << e.instance_ids[static_cast<size_t>(t)] << ' ' << buf << '\n';
    }
  }
  if (!out) throw IoError("predict: write failure");
}

// ---- checkpoint format ----

namespace {

constexpr uint32_t kMagic = 0x4c53544dU;  // "MTSL" little-endian
constexpr uint32_t kVersion = 1;

void write_config(std::ostream& out, const ModelConfig& c) {
  io::write_u32(out, static_cast<uint32_t>(c.embed_dim));
  io::write_u32(out, static_cast<uint32_t>(c.hidden_dim));
  io::write_f64(out, c.dropout_rate);
  io::write_f64(out, c.alpha);
  io::write_u32(out, static_cast<uint32_t>(c.cnn_kernel_widths.size()));
  for (int w : c.cnn_kernel_widths) io::write_u32(out, static_cast<uint32_t>(w));
  io::write_u32(out, static_cast<uint32_t>(c.cnn_filters_per_width));
  io::write_u32(out, static_cast<uint32_t>(c.mlp_hidden_layers));
  uint32_t flags = 0;
  if (c.use_meta) flags |= 1;
  if (c.use_word_enc) flags |= 2;
  if (c.use_char_lstm_enc) flags |= 4;
  if (c.use_char_cnn_enc) flags |= 8;
  io::write_u32(out, flags);
  uint32_t mask = 0;
  for (int i = 0; i < kMetaFieldCount; ++i)
    if (c.masked[static_cast<size_t>(i)]) mask |= 1u << i;
  io::write_u32(out, mask);
}

ModelConfig read_config(std::istream& in) {
  ModelConfig c;
  c.embed_dim = static_cast<int>(io::read_u32(in));
  c.hidden_dim = static_cast<int>(io::read_u32(in));
  c.dropout_rate = io::read_f64(in);
  c.alpha = io::read_f64(in);
  const uint32_t nw = io::read_u32(in);
  c.cnn_kernel_widths.clear();
  for (uint32_t i = 0; i < nw; ++i) c.cnn_kernel_widths.push_back(static_cast<int>(io::read_u32(in)));
  c.cnn_filters_per_width = static_cast<int>(io::read_u32(in));
  c.mlp_hidden_layers = static_cast<int>(io::read_u32(in));
  const uint32_t flags = io::read_u32(in);
  c.use_meta = flags & 1;
  c.use_word_enc = flags & 2;
  c.use_char_lstm_enc = flags & 4;
  c.use_char_cnn_enc = flags & 8;
  const uint32_t mask = io::read_u32(in);
  for (int i = 0; i < kMetaFieldCount; ++i) c.masked[static_cast<size_t>(i)] = mask & (1u << i);
  return c;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  io::write_u32(out, static_cast<uint32_t>(t.rows));
  io::write_u32(out, static_cast<uint32_t>(t.cols));
  for (double v : t.data) io::write_f64(out, v);
}

Tensor read_tensor(std::istream& in) {
  const int rows = static_cast<int>(io::read_u32(in));
  const int cols = static_cast<int>(io::read_u32(in));
  if (rows < 1 || cols < 1 || static_cast<int64_t>(rows) * cols > (1LL << 31))
    throw ParseError("checkpoint: implausible tensor shape");
  Tensor t(rows, cols);
  for (double& v : t.data) v = io::read_f64(in);
  return t;
}

}  // namespace

void save_checkpoint(const MTLModel& model, const TrainState* state, std::ostream& out) {
  io::write_u32(out, kMagic);
  io::write_u32(out, kVersion);
  write_config(out, model.config);
  io::write_u64(out, model.language_tags.size());
  for (const auto& tag : model.language_tags) io::write_string(out, tag);
  model.vocab.save(out);
  io::write_u64(out, static_cast<uint64_t>(model.params.count()));
  for (int i = 0; i < model.params.count(); ++i) {
    io::write_string(out, model.params[i].name);
    io::write_u32(out, model.params[i].embedding ? 1 : 0);
    write_tensor(out, model.params.value(i));
  }
  io::write_u32(out, state ? 1 : 0);
  if (state) {
    io::write_f64(out, state->adam.hp.lr);
    io::write_f64(out, state->adam.hp.beta1);
    io::write_f64(out, state->adam.hp.beta2);
    io::write_f64(out, state->adam.hp.eps);
    io::write_u64(out, static_cast<uint64_t>(state->adam.t));
    for (const Tensor& t : state->adam.m) write_tensor(out, t);
    for (const Tensor& t : state->adam.v) write_tensor(out, t);
    io::write_u64(out, static_cast<uint64_t>(state->global_step));
    io::write_u32(out, static_cast<uint32_t>(state->next_epoch));
  }
  if (!out) throw IoError("checkpoint: write failure");
}

void save_checkpoint_file(const MTLModel& model, const TrainState* state,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
  save_checkpoint(model, state, out);
}

Checkpoint load_checkpoint(std::istream& in) {
  if (io::read_u32(in) != kMagic) throw ParseError("checkpoint: bad magic, not an MTSL file");
  const uint32_t version = io::read_u32(in);
  if (version != kVersion)
    throw ParseError("checkpoint: unsupported format version " + std::to_string(version));
  const ModelConfig config = read_config(in);
  const uint64_t n_langs = io::read_u64(in);
  std::vector<std::string> tags;
  for (uint64_t i = 0; i < n_langs; ++i) tags.push_back(io::read_string(in));
  Vocabulary vocab = Vocabulary::load(in);

  // Rebuild the parameter layout deterministically, then overwrite values.
  Checkpoint ck{init_model(config, vocab, tags, 0), std::nullopt};
  const uint64_t n_params = io::read_u64(in);
  if (n_params != static_cast<uint64_t>(ck.model.params.count()))
    throw ParseError("checkpoint: parameter count does not match the config layout");
  for (int i = 0; i < ck.model.params.count(); ++i) {
    const std::string name = io::read_string(in);
    if (name != ck.model.params[i].name)
      throw ParseError("checkpoint: parameter order mismatch at " + name);
    const bool embedding = io::read_u32(in) != 0;
    if (embedding != ck.model.params[i].embedding)
      throw ParseError("checkpoint: parameter kind mismatch at " + name);
    Tensor t = read_tensor(in);
    if (!t.same_shape(ck.model.params.value(i)))
      throw ParseError("checkpoint: shape mismatch at " + name);
    ck.model.params.value(i) = std::move(t);
  }
  if (io::read_u32(in) != 0) {
    TrainState st;
    st.adam.hp.lr = io::read_f64(in);
    st.adam.hp.beta1 = io::read_f64(in);
    st.adam.hp.beta2 = io::read_f64(in);
    st.adam.hp.eps = io::read_f64(in);
    st.adam.t = static_cast<int64_t>(io::read_u64(in));
    for (int i = 0; i < ck.model.params.count(); ++i) st.adam.m.push_back(read_tensor(in));
    for (int i = 0; i < ck.model.params.count(); ++i) st.adam.v.push_back(read_tensor(in));
    st.global_step = static_cast<int64_t>(io::read_u64(in));
    st.next_epoch = static_cast<int>(io::read_u32(in));
    ck.state = std::move(st);
  }
  return ck;
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace mtslam
