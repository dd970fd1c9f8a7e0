#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mtslam/tape.hpp"
#include "mtslam/tensor.hpp"

namespace mtslam {

// Named model parameters. Index order is creation order and is part of the
// checkpoint contract. Embedding-flagged parameters receive their gradients
// as sparse row contributions; everything else as full-shape buffers.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool embedding = false;
  };

  int add(std::string name, Tensor init, bool embedding = false) {
    items_.push_back(Entry{std::move(name), std::move(init), embedding});
    return static_cast<int>(items_.size()) - 1;
  }

  int count() const { return static_cast<int>(items_.size()); }
  Entry& operator[](int i) { return items_[static_cast<size_t>(i)]; }
  const Entry& operator[](int i) const { return items_[static_cast<size_t>(i)]; }

  Tensor& value(int i) { return items_[static_cast<size_t>(i)].value; }
  const Tensor& value(int i) const { return items_[static_cast<size_t>(i)].value; }

  int64_t scalar_count() const {
    int64_t n = 0;
    for (const Entry& e : items_) n += e.value.size();
    return n;
  }

  Var use(Tape& tape, int i) const { return tape.param(i, value(i)); }

 private:
  std::vector<Entry> items_;
};

// Per-pass gradient collector. Dense buffers for matrix-style parameters,
// append-only (row, vec) pairs for embedding lookups; merged into a dense
// accumulator in a caller-chosen order so training stays deterministic
// under any thread count.
class GradBuffer : public GradSink {
 public:
  explicit GradBuffer(int n_params) : dense_(n_params), rows_(n_params) {}

  double* dense(int param, int rows, int cols) override {
    Tensor& t = dense_[static_cast<size_t>(param)];
    if (t.size() == 0) t = Tensor(rows, cols);
    return t.data.data();
  }

  void add_row(int param, int /*rows*/, int cols, int row, const double* g) override {
    rows_[static_cast<size_t>(param)].emplace_back(row, std::vector<double>(g, g + cols));
  }

  void clear() {
    for (Tensor& t : dense_)
      if (t.size() > 0) std::fill(t.data.begin(), t.data.end(), 0.0);
    for (auto& r : rows_) r.clear();
  }

  // Adds this buffer into `acc` (full-shape tensors aligned with the store).
  void merge_into(std::vector<Tensor>& acc) const {
    for (size_t p = 0; p < dense_.size(); ++p) {
      const Tensor& t = dense_[p];
      if (t.size() > 0)
        for (int i = 0; i < t.size(); ++i) acc[p].data[static_cast<size_t>(i)] += t.data[static_cast<size_t>(i)];
      for (const auto& [row, vec] : rows_[p]) {
        double* dst = acc[p].data.data() + static_cast<size_t>(row) * acc[p].cols;
        for (size_t i = 0; i < vec.size(); ++i) dst[i] += vec[i];
      }
    }
  }

  // Dense view of one parameter's gradient (for tests and single-pass use).
  Tensor materialize(const ParamStore& store, int param) const {
    const Tensor& shape = store.value(param);
    Tensor out(shape.rows, shape.cols);
    const Tensor& t = dense_[static_cast<size_t>(param)];
    if (t.size() > 0) out.data = t.data;
    for (const auto& [row, vec] : rows_[static_cast<size_t>(param)]) {
      double* dst = out.data.data() + static_cast<size_t>(row) * out.cols;
      for (size_t i = 0; i < vec.size(); ++i) dst[i] += vec[i];
    }
    return out;
  }

 private:
  std::vector<Tensor> dense_;
  std::vector<std::vector<std::pair<int, std::vector<double>>>> rows_;
};

// Allocates one zeroed full-shape gradient per parameter.
inline std::vector<Tensor> make_grad_accumulator(const ParamStore& store) {
  std::vector<Tensor> acc;
  acc.reserve(static_cast<size_t>(store.count()));
  for (int i = 0; i < store.count(); ++i)
    acc.emplace_back(store.value(i).rows, store.value(i).cols);
  return acc;
}

inline void zero_grads(std::vector<Tensor>& acc) {
  for (Tensor& t : acc) std::fill(t.data.begin(), t.data.end(), 0.0);
}

}  // namespace mtslam
