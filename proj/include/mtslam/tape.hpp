#pragma once

// Reverse-mode autodiff over dense 2-D tensors.
//
// A Tape owns one forward/backward pass: nodes are appended in evaluation
// order (so node inputs always precede the node), values live in a single
// arena that is reused across passes, and backward() walks the node list in
// reverse exactly once. Parameters are external leaves: their values are
// viewed, not copied, and their gradients are routed into a GradSink instead
// of the tape arena. A tape is single-owner; one thread, one pass at a time.

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "mtslam/rng.hpp"
#include "mtslam/tensor.hpp"

namespace mtslam {

enum class Mode { train, eval };

// Handle into a tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Receives parameter gradients during backward. Embedding-style lookups
// report per-row contributions; everything else reports full-shape buffers.
class GradSink {
 public:
  virtual ~GradSink() = default;
  // Full-shape accumulation buffer for the parameter (zero-initialized on
  // first request, stable for the sink's lifetime).
  virtual double* dense(int param, int rows, int cols) = 0;
  // Adds g (length d) into row `row` of the parameter's gradient.
  virtual void add_row(int param, int rows, int cols, int row, const double* g) = 0;
};

class Tape {
 public:
  enum class Op : uint8_t {
    constant,
    param,
    matmul,
    add,
    mul,
    sigmoid,
    tanh_fn,
    relu,
    log_fn,
    neg,
    logsig,
    scale,
    add_const,
    concat_rows,
    concat_cols,
    slice_cols,
    lookup,
    conv1d,
    max_time,
    dropout,
    sum_all,
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Drops all nodes but keeps arena capacity for the next pass.
  void reset();

  int size() const { return static_cast<int>(nodes_.size()); }

  // ---- leaves ----
  Var constant(const Tensor& t);
  Var scalar(double v);
  Var zeros(int rows, int cols);
  // Tracked leaf viewing external parameter storage. The storage must stay
  // valid and unmodified for the lifetime of the pass.
  Var param(int param_id, const Tensor& value);

  // ---- ops ----
  Var matmul(Var a, Var b);
  // Binary elementwise; equal shapes, or either side a 1x1 scalar.
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var log(Var a);
  Var neg(Var a);
  // log(sigmoid(x)) without intermediate underflow.
  Var logsig(Var a);
  Var scale(Var a, double c);
  Var add_const(Var a, double c);
  Var concat(std::span<const Var> parts, int axis);
  Var concat(std::initializer_list<Var> parts, int axis);
  Var slice_cols(Var a, int start, int len);
  Var lookup(Var table, int row);
  // Valid cross-correlation over time; input [L x d], filters [(w*d) x f],
  // bias [1 x f]; output [(L-w+1) x f].
  Var conv1d(Var input, Var filters, Var bias, int width);
  Var max_over_time(Var a);
  Var dropout(Var a, double rate, Mode mode, Rng& rng);
  Var sum(Var a);

  // ---- execution ----
  // Reverse accumulation from a scalar loss node. Parameter gradients are
  // added into `sink` (may be null when only interior gradients matter).
  void backward(Var loss, GradSink* sink, double seed = 1.0);

  // ---- inspection ----
  Tensor value(Var v) const;
  // Gradient of the last backward() w.r.t. an interior (non-param) node.
  Tensor grad(Var v) const;
  int rows(Var v) const { return node(v.id).rows; }
  int cols(Var v) const { return node(v.id).cols; }

 private:
  struct Node {
    Op op;
    int rows, cols;
    int a = -1, b = -1;
    int i0 = 0, i1 = 0;    // op payload: slice start/len, lookup row, conv width/bias
    int val_off = -1;      // arena offset (interior nodes)
    const double* ext = nullptr;  // external storage (param leaves)
    int aux_off = 0, aux_len = 0;  // iaux span (concat inputs, argmax)
    int daux_off = 0, daux_len = 0;  // daux span (dropout mask)
    int param = -1;
    double c = 0.0;
    bool tracked = false;
  };

  const Node& node(int id) const;
  Node& node(int id);
  const double* val(int id) const;
  double* grad_ptr(int id);
  int push(Node n, int value_len);
  Var unary(Op op, Var a);
  Var binary(Op op, Var a, Var b);
  void check(Var v) const;

  std::vector<Node> nodes_;
  std::vector<double> vals_;
  std::vector<double> grads_;
  std::vector<int> iaux_;
  std::vector<double> daux_;
  std::vector<uint8_t> reached_;
};

}  // namespace mtslam
