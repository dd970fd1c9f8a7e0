#include "mtslam/tape.hpp"

#include <cmath>
#include <cstring>

#include "mtslam/error.hpp"
#include "mtslam/kernels.hpp"

namespace mtslam {

namespace {

double stable_logsig(double x) {
  // log(1/(1+e^-x)) = -log1p(e^-x) for x >= 0, x - log1p(e^x) otherwise.
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid_neg(double x) {
  // sigmoid(-x), stable on both tails.
  return x >= 0.0 ? std::exp(-x) / (1.0 + std::exp(-x)) : 1.0 / (1.0 + std::exp(x));
}

}  // namespace

void Tape::reset() {
  nodes_.clear();
  vals_.clear();
  iaux_.clear();
  daux_.clear();
}

const Tape::Node& Tape::node(int id) const { return nodes_[static_cast<size_t>(id)]; }
Tape::Node& Tape::node(int id) { return nodes_[static_cast<size_t>(id)]; }

const double* Tape::val(int id) const {
  const Node& n = node(id);
  return n.ext ? n.ext : vals_.data() + n.val_off;
}

double* Tape::grad_ptr(int id) { return grads_.data() + node(id).val_off; }

void Tape::check(Var v) const {
  if (v.id < 0 || v.id >= size()) throw ContractError("tape: invalid var handle");
}

int Tape::push(Node n, int value_len) {
  if (value_len > 0) {
    n.val_off = static_cast<int>(vals_.size());
    vals_.resize(vals_.size() + static_cast<size_t>(value_len));
  }
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::constant(const Tensor& t) {
  Node n{};
  n.op = Op::constant;
  n.rows = t.rows;
  n.cols = t.cols;
  const int id = push(n, t.size());
  std::memcpy(vals_.data() + node(id).val_off, t.data.data(), sizeof(double) * t.data.size());
  return Var{id};
}

Var Tape::scalar(double v) {
  Node n{};
  n.op = Op::constant;
  n.rows = 1;
  n.cols = 1;
  const int id = push(n, 1);
  vals_[static_cast<size_t>(node(id).val_off)] = v;
  return Var{id};
}

Var Tape::zeros(int rows, int cols) {
  Node n{};
  n.op = Op::constant;
  n.rows = rows;
  n.cols = cols;
  const int id = push(n, rows * cols);
  std::memset(vals_.data() + node(id).val_off, 0, sizeof(double) * static_cast<size_t>(rows) * cols);
  return Var{id};
}

Var Tape::param(int param_id, const Tensor& value) {
  Node n{};
  n.op = Op::param;
  n.rows = value.rows;
  n.cols = value.cols;
  n.ext = value.data.data();
  n.param = param_id;
  n.tracked = true;
  return Var{push(n, 0)};
}

Var Tape::matmul(Var a, Var b) {
  check(a);
  check(b);
  const Node& na = node(a.id);
  const Node& nb = node(b.id);
  if (na.cols != nb.rows)
    throw DimError("matmul: inner dims disagree, " + std::to_string(na.rows) + "x" +
                   std::to_string(na.cols) + " * " + std::to_string(nb.rows) + "x" +
                   std::to_string(nb.cols));
  Node n{};
  n.op = Op::matmul;
  n.rows = na.rows;
  n.cols = nb.cols;
  n.a = a.id;
  n.b = b.id;
  n.tracked = na.tracked || nb.tracked;
  const int id = push(n, n.rows * n.cols);
  kernels::matmul_nn(node(a.id).rows, node(a.id).cols, node(b.id).cols, val(a.id), val(b.id),
                     vals_.data() + node(id).val_off);
  return Var{id};
}

Var Tape::binary(Op op, Var a, Var b) {
  check(a);
  check(b);
  const Node& na = node(a.id);
  const Node& nb = node(b.id);
  const bool a_scalar = na.rows == 1 && na.cols == 1;
  const bool b_scalar = nb.rows == 1 && nb.cols == 1;
  if (!(na.rows == nb.rows && na.cols == nb.cols) && !a_scalar && !b_scalar)
    throw DimError("elementwise op: shapes disagree, " + std::to_string(na.rows) + "x" +
                   std::to_string(na.cols) + " vs " + std::to_string(nb.rows) + "x" +
                   std::to_string(nb.cols));
  Node n{};
  n.op = op;
  n.rows = a_scalar && !b_scalar ? nb.rows : na.rows;
  n.cols = a_scalar && !b_scalar ? nb.cols : na.cols;
  n.a = a.id;
  n.b = b.id;
  n.tracked = na.tracked || nb.tracked;
  const int id = push(n, n.rows * n.cols);
  double* out = vals_.data() + node(id).val_off;
  const double* pa = val(a.id);
  const double* pb = val(b.id);
  const int m = n.rows * n.cols;
  const bool sa = a_scalar && !(na.rows == nb.rows && na.cols == nb.cols);
  const bool sb = b_scalar && !(na.rows == nb.rows && na.cols == nb.cols);
  if (op == Op::add) {
    if (sa)
      for (int i = 0; i < m; ++i) out[i] = pa[0] + pb[i];
    else if (sb)
      for (int i = 0; i < m; ++i) out[i] = pa[i] + pb[0];
    else
      kernels::add(m, pa, pb, out);
  } else {
    if (sa)
      for (int i = 0; i < m; ++i) out[i] = pa[0] * pb[i];
    else if (sb)
      for (int i = 0; i < m; ++i) out[i] = pa[i] * pb[0];
    else
      kernels::mul(m, pa, pb, out);
  }
  return Var{id};
}

Var Tape::add(Var a, Var b) { return binary(Op::add, a, b); }
Var Tape::mul(Var a, Var b) { return binary(Op::mul, a, b); }

Var Tape::unary(Op op, Var a) {
  check(a);
  const Node& na = node(a.id);
  Node n{};
  n.op = op;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.tracked = na.tracked;
  const int id = push(n, n.rows * n.cols);
  double* out = vals_.data() + node(id).val_off;
  const double* in = val(a.id);
  const int m = n.rows * n.cols;
  switch (op) {
    case Op::sigmoid:
      kernels::sigmoid(m, in, out);
      break;
    case Op::tanh_fn:
      kernels::tanh(m, in, out);
      break;
    case Op::relu:
      kernels::relu(m, in, out);
      break;
    case Op::log_fn:
      for (int i = 0; i < m; ++i) {
        if (in[i] <= 0.0) throw DomainError("log: non-positive input " + std::to_string(in[i]));
        out[i] = std::log(in[i]);
      }
      break;
    case Op::neg:
      for (int i = 0; i < m; ++i) out[i] = -in[i];
      break;
    case Op::logsig:
      for (int i = 0; i < m; ++i) out[i] = stable_logsig(in[i]);
      break;
    default:
      throw ContractError("unary: bad op");
  }
  return Var{id};
}

Var Tape::sigmoid(Var a) { return unary(Op::sigmoid, a); }
Var Tape::tanh(Var a) { return unary(Op::tanh_fn, a); }
Var Tape::relu(Var a) { return unary(Op::relu, a); }
Var Tape::log(Var a) { return unary(Op::log_fn, a); }
Var Tape::neg(Var a) { return unary(Op::neg, a); }
Var Tape::logsig(Var a) { return unary(Op::logsig, a); }

Var Tape::scale(Var a, double c) {
  check(a);
  const Node& na = node(a.id);
  Node n{};
  n.op = Op::scale;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.c = c;
  n.tracked = na.tracked;
  const int id = push(n, n.rows * n.cols);
  double* out = vals_.data() + node(id).val_off;
  const double* in = val(a.id);
  for (int i = 0; i < n.rows * n.cols; ++i) out[i] = c * in[i];
  return Var{id};
}

Var Tape::add_const(Var a, double c) {
  check(a);
  const Node& na = node(a.id);
  Node n{};
  n.op = Op::add_const;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.c = c;
  n.tracked = na.tracked;
  const int id = push(n, n.rows * n.cols);
  double* out = vals_.data() + node(id).val_off;
  const double* in = val(a.id);
  for (int i = 0; i < n.rows * n.cols; ++i) out[i] = in[i] + c;
  return Var{id};
}

Var Tape::concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var Tape::concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw DimError("concat: no inputs");
  if (axis != 0 && axis != 1) throw DimError("concat: axis must be 0 or 1");
  int rows = node(parts[0].id).rows;
  int cols = node(parts[0].id).cols;
  bool tracked = false;
  for (size_t i = 0; i < parts.size(); ++i) {
    check(parts[i]);
    const Node& np = node(parts[i].id);
    tracked = tracked || np.tracked;
    if (i == 0) continue;
    if (axis == 0) {
      if (np.cols != cols)
        throw DimError("concat axis 0: column counts disagree, " + std::to_string(cols) + " vs " +
                       std::to_string(np.cols));
      rows += np.rows;
    } else {
      if (np.rows != rows)
        throw DimError("concat axis 1: row counts disagree, " + std::to_string(rows) + " vs " +
                       std::to_string(np.rows));
      cols += np.cols;
    }
  }
  Node n{};
  n.op = axis == 0 ? Op::concat_rows : Op::concat_cols;
  n.rows = rows;
  n.cols = cols;
  n.tracked = tracked;
  n.aux_off = static_cast<int>(iaux_.size());
  n.aux_len = static_cast<int>(parts.size());
  for (const Var& p : parts) iaux_.push_back(p.id);
  const int id = push(n, rows * cols);
  double* out = vals_.data() + node(id).val_off;
  if (axis == 0) {
    size_t off = 0;
    for (const Var& p : parts) {
      const Node& np = node(p.id);
      std::memcpy(out + off, val(p.id), sizeof(double) * static_cast<size_t>(np.rows) * np.cols);
      off += static_cast<size_t>(np.rows) * np.cols;
    }
  } else {
    int coff = 0;
    for (const Var& p : parts) {
      const Node& np = node(p.id);
      const double* in = val(p.id);
      for (int r = 0; r < rows; ++r)
        std::memcpy(out + static_cast<size_t>(r) * cols + coff, in + static_cast<size_t>(r) * np.cols,
                    sizeof(double) * static_cast<size_t>(np.cols));
      coff += np.cols;
    }
  }
  return Var{id};
}

Var Tape::slice_cols(Var a, int start, int len) {
  check(a);
  const int arows = node(a.id).rows;
  const int acols = node(a.id).cols;
  if (start < 0 || len <= 0 || start + len > acols)
    throw DimError("slice_cols: range [" + std::to_string(start) + "," +
                   std::to_string(start + len) + ") outside width " + std::to_string(acols));
  Node n{};
  n.op = Op::slice_cols;
  n.rows = arows;
  n.cols = len;
  n.a = a.id;
  n.i0 = start;
  n.i1 = len;
  n.tracked = node(a.id).tracked;
  const int id = push(n, arows * len);
  double* out = vals_.data() + node(id).val_off;
  const double* in = val(a.id);
  for (int r = 0; r < arows; ++r)
    std::memcpy(out + static_cast<size_t>(r) * len, in + static_cast<size_t>(r) * acols + start,
                sizeof(double) * static_cast<size_t>(len));
  return Var{id};
}

Var Tape::lookup(Var table, int row) {
  check(table);
  const int trows = node(table.id).rows;
  const int tcols = node(table.id).cols;
  if (row < 0 || row >= trows)
    throw ContractError("lookup: row " + std::to_string(row) + " out of range for table with " +
                        std::to_string(trows) + " rows");
  Node n{};
  n.op = Op::lookup;
  n.rows = 1;
  n.cols = tcols;
  n.a = table.id;
  n.i0 = row;
  n.tracked = node(table.id).tracked;
  const int id = push(n, tcols);
  std::memcpy(vals_.data() + node(id).val_off, val(table.id) + static_cast<size_t>(row) * tcols,
              sizeof(double) * static_cast<size_t>(tcols));
  return Var{id};
}

Var Tape::conv1d(Var input, Var filters, Var bias, int width) {
  check(input);
  check(filters);
  check(bias);
  const Node& ni = node(input.id);
  const Node& nf = node(filters.id);
  const Node& nb = node(bias.id);
  if (width < 1) throw DimError("conv1d: width must be >= 1");
  if (nf.rows != width * ni.cols)
    throw DimError("conv1d: filters rows " + std::to_string(nf.rows) + " != width*d " +
                   std::to_string(width * ni.cols));
  if (nb.rows != 1 || nb.cols != nf.cols)
    throw DimError("conv1d: bias must be 1x" + std::to_string(nf.cols));
  if (ni.rows < width)
    throw InputError("conv1d: input length " + std::to_string(ni.rows) +
                     " shorter than kernel width " + std::to_string(width));
  Node n{};
  n.op = Op::conv1d;
  n.rows = ni.rows - width + 1;
  n.cols = nf.cols;
  n.a = input.id;
  n.b = filters.id;
  n.i0 = width;
  n.i1 = bias.id;
  n.tracked = ni.tracked || nf.tracked || nb.tracked;
  const int id = push(n, n.rows * n.cols);
  kernels::conv1d_fwd(node(input.id).rows, node(input.id).cols, width, node(filters.id).cols,
                      val(input.id), val(filters.id), val(bias.id), vals_.data() + node(id).val_off);
  return Var{id};
}

Var Tape::max_over_time(Var a) {
  check(a);
  const Node& na = node(a.id);
  if (na.rows < 1) throw InputError("max_over_time: empty time axis");
  Node n{};
  n.op = Op::max_time;
  n.rows = 1;
  n.cols = na.cols;
  n.a = a.id;
  n.aux_off = static_cast<int>(iaux_.size());
  n.aux_len = na.cols;
  n.tracked = na.tracked;
  iaux_.resize(iaux_.size() + static_cast<size_t>(na.cols));
  const int id = push(n, na.cols);
  kernels::ref::col_max(node(a.id).rows, node(a.id).cols, val(a.id),
                        vals_.data() + node(id).val_off, iaux_.data() + node(id).aux_off);
  return Var{id};
}

Var Tape::dropout(Var a, double rate, Mode mode, Rng& rng) {
  check(a);
  if (rate < 0.0 || rate >= 1.0)
    throw ContractError("dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (mode == Mode::eval || rate == 0.0) return a;  // identity, no node
  const Node& na = node(a.id);
  Node n{};
  n.op = Op::dropout;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.tracked = na.tracked;
  n.daux_off = static_cast<int>(daux_.size());
  n.daux_len = na.rows * na.cols;
  const double keep_scale = 1.0 / (1.0 - rate);
  daux_.resize(daux_.size() + static_cast<size_t>(n.daux_len));
  const int id = push(n, n.rows * n.cols);
  double* mask = daux_.data() + node(id).daux_off;
  double* out = vals_.data() + node(id).val_off;
  const double* in = val(a.id);
  for (int i = 0; i < n.rows * n.cols; ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] = in[i] * mask[i];
  }
  return Var{id};
}

Var Tape::sum(Var a) {
  check(a);
  const Node& na = node(a.id);
  Node n{};
  n.op = Op::sum_all;
  n.rows = 1;
  n.cols = 1;
  n.a = a.id;
  n.tracked = na.tracked;
  const int id = push(n, 1);
  const double* in = val(a.id);
  double s = 0.0;
  for (int i = 0; i < node(a.id).rows * node(a.id).cols; ++i) s += in[i];
  vals_[static_cast<size_t>(node(id).val_off)] = s;
  return Var{id};
}

Tensor Tape::value(Var v) const {
  check(v);
  const Node& n = node(v.id);
  Tensor t(n.rows, n.cols);
  std::memcpy(t.data.data(), val(v.id), sizeof(double) * t.data.size());
  return t;
}

Tensor Tape::grad(Var v) const {
  check(v);
  const Node& n = node(v.id);
  if (n.op == Op::param) throw ContractError("grad: param gradients live in the GradSink");
  Tensor t(n.rows, n.cols);
  if (n.val_off >= 0 && static_cast<size_t>(n.val_off) + t.data.size() <= grads_.size())
    std::memcpy(t.data.data(), grads_.data() + n.val_off, sizeof(double) * t.data.size());
  return t;
}

void Tape::backward(Var loss, GradSink* sink, double seed) {
  check(loss);
  const Node& ln = node(loss.id);
  if (ln.rows != 1 || ln.cols != 1)
    throw ContractError("backward: loss must be scalar, got " + std::to_string(ln.rows) + "x" +
                        std::to_string(ln.cols));
  grads_.assign(vals_.size(), 0.0);
  reached_.assign(nodes_.size(), 0);
  if (ln.op == Op::param) {
    if (sink) sink->dense(ln.param, 1, 1)[0] += seed;
    return;
  }
  grads_[static_cast<size_t>(ln.val_off)] = seed;
  reached_[static_cast<size_t>(loss.id)] = 1;

  auto reach = [&](int id) {
    if (id >= 0 && node(id).tracked) reached_[static_cast<size_t>(id)] = 1;
  };
  // Routes `g` (the local gradient w.r.t. input `id`, length = that node's
  // size) into either the arena or the parameter sink.
  auto into_input = [&](int id, const double* g, int len) {
    const Node& in = node(id);
    if (!in.tracked) return;
    if (in.op == Op::param) {
      if (sink) {
        double* d = sink->dense(in.param, in.rows, in.cols);
        for (int i = 0; i < len; ++i) d[i] += g[i];
      }
    } else {
      double* d = grads_.data() + in.val_off;
      for (int i = 0; i < len; ++i) d[i] += g[i];
    }
  };

  std::vector<double> scratch;
  for (int id = loss.id; id >= 0; --id) {
    if (!reached_[static_cast<size_t>(id)]) continue;
    const Node n = node(id);
    if (n.op == Op::constant || n.op == Op::param) continue;
    const double* g = grads_.data() + n.val_off;
    const int m = n.rows * n.cols;
    switch (n.op) {
      case Op::matmul: {
        const Node& na = node(n.a);
        const Node& nb = node(n.b);
        if (na.tracked) {
          if (na.op == Op::param) {
            if (sink)
              kernels::matmul_nt_acc(na.rows, n.cols, na.cols, g, val(n.b),
                                     sink->dense(na.param, na.rows, na.cols));
          } else {
            kernels::matmul_nt_acc(na.rows, n.cols, na.cols, g, val(n.b), grads_.data() + na.val_off);
          }
          reach(n.a);
        }
        if (nb.tracked) {
          if (nb.op == Op::param) {
            if (sink)
              kernels::matmul_tn_acc(na.rows, na.cols, n.cols, val(n.a), g,
                                     sink->dense(nb.param, nb.rows, nb.cols));
          } else {
            kernels::matmul_tn_acc(na.rows, na.cols, n.cols, val(n.a), g, grads_.data() + nb.val_off);
          }
          reach(n.b);
        }
        break;
      }
      case Op::add:
      case Op::mul: {
        const Node& na = node(n.a);
        const Node& nb = node(n.b);
        const bool sa = (na.rows * na.cols == 1) && m > 1;
        const bool sb = (nb.rows * nb.cols == 1) && m > 1;
        auto side = [&](int in_id, bool is_scalar, bool other_scalar, bool left) {
          const Node& nn = node(in_id);
          if (!nn.tracked) return;
          scratch.assign(static_cast<size_t>(is_scalar ? 1 : m), 0.0);
          if (n.op == Op::add) {
            if (is_scalar) {
              double s = 0.0;
              for (int i = 0; i < m; ++i) s += g[i];
              scratch[0] = s;
            } else {
              for (int i = 0; i < m; ++i) scratch[i] = g[i];
            }
          } else {  // mul
            const double* ov = left ? val(n.b) : val(n.a);
            if (is_scalar) {
              double s = 0.0;
              if (other_scalar) {
                s = g[0] * ov[0];
              } else {
                for (int i = 0; i < m; ++i) s += g[i] * ov[i];
              }
              scratch[0] = s;
            } else if (other_scalar) {
              for (int i = 0; i < m; ++i) scratch[i] = g[i] * ov[0];
            } else {
              for (int i = 0; i < m; ++i) scratch[i] = g[i] * ov[i];
            }
          }
          into_input(in_id, scratch.data(), static_cast<int>(scratch.size()));
          reach(in_id);
        };
        side(n.a, sa, sb, true);
        side(n.b, sb, sa, false);
        break;
      }
      case Op::sigmoid: {
        const double* y = vals_.data() + n.val_off;
        scratch.resize(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) scratch[i] = g[i] * y[i] * (1.0 - y[i]);
        into_input(n.a, scratch.data(), m);
        reach(n.a);
        break;
      }
      case Op::tanh_fn: {
        const double* y = vals_.data() + n.val_off;
        scratch.resize(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) scratch[i] = g[i] * (1.0 - y[i] * y[i]);
        into_input(n.a, scratch.data(), m);
        reach(n.a);
        break;
      }
      case Op::relu: {
        const double* y = vals_.data() + n.val_off;
        scratch.resize(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) scratch[i] = y[i] > 0.0 ? g[i] : 0.0;
        into_input(n.a, scratch.data(), m);
        reach(n.a);
        break;
      }
      case Op::log_fn: {
        const double* x = val(n.a);
        scratch.resize(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) scratch[i] = g[i] / x[i];
        into_input(n.a, scratch.data(), m);
        reach(n.a);
        break;
      }
      case Op::neg: {
        scratch.resize(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) scratch[i] = -g[i];
        into_input(n.a, scratch.data(), m);
        reach(n.a);
        break;
      }
      case Op::logsig: {
        const double* x = val(n.a);
        scratch.resize(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) scratch[i] = g[i] * sigmoid_neg(x[i]);
        into_input(n.a, scratch.data(), m);
        reach(n.a);
        break;
      }
      case Op::scale: {
        scratch.resize(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) scratch[i] = n.c * g[i];
        into_input(n.a, scratch.data(), m);
        reach(n.a);
        break;
      }
      case Op::add_const: {
        into_input(n.a, g, m);
        reach(n.a);
        break;
      }
      case Op::concat_rows: {
        size_t off = 0;
        for (int i = 0; i < n.aux_len; ++i) {
          const int in_id = iaux_[static_cast<size_t>(n.aux_off + i)];
          const Node& nn = node(in_id);
          const int len = nn.rows * nn.cols;
          if (nn.tracked) {
            into_input(in_id, g + off, len);
            reach(in_id);
          }
          off += static_cast<size_t>(len);
        }
        break;
      }
      case Op::concat_cols: {
        int coff = 0;
        for (int i = 0; i < n.aux_len; ++i) {
          const int in_id = iaux_[static_cast<size_t>(n.aux_off + i)];
          const Node& nn = node(in_id);
          if (nn.tracked) {
            scratch.resize(static_cast<size_t>(nn.rows) * nn.cols);
            for (int r = 0; r < nn.rows; ++r)
              std::memcpy(scratch.data() + static_cast<size_t>(r) * nn.cols,
                          g + static_cast<size_t>(r) * n.cols + coff,
                          sizeof(double) * static_cast<size_t>(nn.cols));
            into_input(in_id, scratch.data(), nn.rows * nn.cols);
            reach(in_id);
          }
          coff += nn.cols;
        }
        break;
      }
      case Op::slice_cols: {
        const Node& na = node(n.a);
        if (na.tracked) {
          scratch.assign(static_cast<size_t>(na.rows) * na.cols, 0.0);
          for (int r = 0; r < n.rows; ++r)
            for (int j = 0; j < n.i1; ++j)
              scratch[static_cast<size_t>(r) * na.cols + n.i0 + j] = g[static_cast<size_t>(r) * n.i1 + j];
          into_input(n.a, scratch.data(), na.rows * na.cols);
          reach(n.a);
        }
        break;
      }
      case Op::lookup: {
        const Node& nt = node(n.a);
        if (!nt.tracked) break;
        if (nt.op == Op::param) {
          if (sink) sink->add_row(nt.param, nt.rows, nt.cols, n.i0, g);
        } else {
          kernels::ref::add(n.cols, grads_.data() + nt.val_off + static_cast<size_t>(n.i0) * nt.cols,
                            g, grads_.data() + nt.val_off + static_cast<size_t>(n.i0) * nt.cols);
        }
        reach(n.a);
        break;
      }
      case Op::conv1d: {
        const Node& ni = node(n.a);
        const Node& nf = node(n.b);
        const Node& nbias = node(n.i1);
        const int w = n.i0;
        if (ni.tracked) {
          if (ni.op == Op::param) {
            if (sink)
              kernels::ref::conv1d_bwd_input(ni.rows, ni.cols, w, n.cols, g, val(n.b),
                                             sink->dense(ni.param, ni.rows, ni.cols));
          } else {
            kernels::ref::conv1d_bwd_input(ni.rows, ni.cols, w, n.cols, g, val(n.b),
                                           grads_.data() + ni.val_off);
          }
          reach(n.a);
        }
        if (nf.tracked) {
          if (nf.op == Op::param) {
            if (sink)
              kernels::ref::conv1d_bwd_filter(ni.rows, ni.cols, w, n.cols, val(n.a), g,
                                              sink->dense(nf.param, nf.rows, nf.cols));
          } else {
            kernels::ref::conv1d_bwd_filter(ni.rows, ni.cols, w, n.cols, val(n.a), g,
                                            grads_.data() + nf.val_off);
          }
          reach(n.b);
        }
        if (nbias.tracked) {
          if (nbias.op == Op::param) {
            if (sink)
              kernels::ref::conv1d_bwd_bias(n.rows, n.cols, g, sink->dense(nbias.param, 1, n.cols));
          } else {
            kernels::ref::conv1d_bwd_bias(n.rows, n.cols, g, grads_.data() + nbias.val_off);
          }
          reach(n.i1);
        }
        break;
      }
      case Op::max_time: {
        const Node& na = node(n.a);
        if (na.tracked) {
          scratch.assign(static_cast<size_t>(na.rows) * na.cols, 0.0);
          for (int j = 0; j < n.cols; ++j) {
            const int arg = iaux_[static_cast<size_t>(n.aux_off + j)];
            scratch[static_cast<size_t>(arg) * na.cols + j] = g[j];
          }
          into_input(n.a, scratch.data(), na.rows * na.cols);
          reach(n.a);
        }
        break;
      }
      case Op::dropout: {
        const double* mask = daux_.data() + n.daux_off;
        scratch.resize(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) scratch[i] = g[i] * mask[i];
        into_input(n.a, scratch.data(), m);
        reach(n.a);
        break;
      }
      case Op::sum_all: {
        const Node& na = node(n.a);
        if (na.tracked) {
          scratch.assign(static_cast<size_t>(na.rows) * na.cols, g[0]);
          into_input(n.a, scratch.data(), na.rows * na.cols);
          reach(n.a);
        }
        break;
      }
      default:
        throw ContractError("backward: unhandled op");
    }
  }
}

}  // namespace mtslam
