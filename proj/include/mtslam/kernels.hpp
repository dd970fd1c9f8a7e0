#pragma once

// Numeric inner loops shared by the tape ops. Every kernel exists twice:
// a serial reference under kernels::ref and an OpenMP version under
// kernels::omp. The parallel versions split work over independent output
// elements only, so they are bit-identical to the reference for any thread
// count; tests/test_kernels.cpp asserts exact equality and bench/ compares
// throughput. The unqualified wrappers dispatch by problem size.

#include <algorithm>
#include <cmath>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mtslam::kernels {

// Work threshold (in multiply-adds) below which the dispatchers stay serial;
// spawning a team costs more than the loop for the small per-token matmuls.
inline constexpr long kParallelCutoff = 1 << 16;

namespace ref {

// C[m x n] = A[m x k] * B[k x n]
inline void matmul_nn(int m, int k, int n, const double* A, const double* B, double* C) {
  for (int i = 0; i < m; ++i) {
    double* c = C + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) c[j] = 0.0;
    const double* a = A + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = a[p];
      const double* b = B + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// C[m x k] += A[m x n] * B^T, B is [k x n]  (dgrad of matmul wrt left input)
inline void matmul_nt_acc(int m, int n, int k, const double* A, const double* B, double* C) {
  for (int i = 0; i < m; ++i) {
    const double* a = A + static_cast<size_t>(i) * n;
    double* c = C + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double* b = B + static_cast<size_t>(p) * n;
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += a[j] * b[j];
      c[p] += s;
    }
  }
}

// C[k x n] += A^T * B, A is [m x k], B is [m x n]  (dgrad wrt right input)
inline void matmul_tn_acc(int m, int k, int n, const double* A, const double* B, double* C) {
  for (int p = 0; p < k; ++p) {
    double* c = C + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = A[static_cast<size_t>(i) * k + p];
      if (av == 0.0) continue;
      const double* b = B + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// Valid cross-correlation over time. in [L x d], filt [(w*d) x f], out [L' x f]
// with L' = L - w + 1; bias[f] added to every output row.
inline void conv1d_fwd(int L, int d, int w, int f, const double* in, const double* filt,
                       const double* bias, double* out) {
  const int Lp = L - w + 1;
  for (int i = 0; i < Lp; ++i) {
    double* o = out + static_cast<size_t>(i) * f;
    for (int j = 0; j < f; ++j) o[j] = bias[j];
    const double* win = in + static_cast<size_t>(i) * d;
    for (int u = 0; u < w * d; ++u) {
      const double x = win[u];
      if (x == 0.0) continue;
      const double* fr = filt + static_cast<size_t>(u) * f;
      for (int j = 0; j < f; ++j) o[j] += x * fr[j];
    }
  }
}

inline void conv1d_bwd_input(int L, int d, int w, int f, const double* dout,
                             const double* filt, double* din) {
  const int Lp = L - w + 1;
  // din[t, c] += sum over windows i covering t of dout[i, :] . filt[(t-i)*d+c, :]
  for (int t = 0; t < L; ++t) {
    double* g = din + static_cast<size_t>(t) * d;
    const int i_lo = std::max(0, t - w + 1);
    const int i_hi = std::min(Lp - 1, t);
    for (int i = i_lo; i <= i_hi; ++i) {
      const double* doutr = dout + static_cast<size_t>(i) * f;
      const double* fr = filt + static_cast<size_t>((t - i) * d) * f;
      for (int c = 0; c < d; ++c) {
        double s = 0.0;
        const double* fc = fr + static_cast<size_t>(c) * f;
        for (int j = 0; j < f; ++j) s += doutr[j] * fc[j];
        g[c] += s;
      }
    }
  }
}

inline void conv1d_bwd_filter(int L, int d, int w, int f, const double* in,
                              const double* dout, double* dfilt) {
  const int Lp = L - w + 1;
  for (int u = 0; u < w * d; ++u) {
    double* g = dfilt + static_cast<size_t>(u) * f;
    for (int i = 0; i < Lp; ++i) {
      const double x = in[static_cast<size_t>(i) * d + u];
      if (x == 0.0) continue;
      const double* doutr = dout + static_cast<size_t>(i) * f;
      for (int j = 0; j < f; ++j) g[j] += x * doutr[j];
    }
  }
}

inline void conv1d_bwd_bias(int Lp, int f, const double* dout, double* dbias) {
  for (int j = 0; j < f; ++j) {
    double s = 0.0;
    for (int i = 0; i < Lp; ++i) s += dout[static_cast<size_t>(i) * f + j];
    dbias[j] += s;
  }
}

// Per-column max over rows; records the first maximal row index per column.
inline void col_max(int L, int f, const double* in, double* out, int* argmax) {
  for (int j = 0; j < f; ++j) {
    double best = in[j];
    int arg = 0;
    for (int i = 1; i < L; ++i) {
      const double v = in[static_cast<size_t>(i) * f + j];
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    out[j] = best;
    argmax[j] = arg;
  }
}

inline void sigmoid(int n, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

inline void tanh(int n, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

inline void relu(int n, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

inline void add(int n, const double* a, const double* b, double* y) {
  for (int i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

inline void mul(int n, const double* a, const double* b, double* y) {
  for (int i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

inline void axpy(int n, double a, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace ref

namespace omp {

inline void matmul_nn(int m, int k, int n, const double* A, const double* B, double* C) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) ref::matmul_nn(1, k, n, A + static_cast<size_t>(i) * k, B, C + static_cast<size_t>(i) * n);
}

inline void matmul_nt_acc(int m, int n, int k, const double* A, const double* B, double* C) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    ref::matmul_nt_acc(1, n, k, A + static_cast<size_t>(i) * n, B, C + static_cast<size_t>(i) * k);
}

inline void matmul_tn_acc(int m, int k, int n, const double* A, const double* B, double* C) {
  // Each output row p of C is owned by one thread; accumulation over m stays
  // in row-index order, so the result matches the reference bit for bit.
#pragma omp parallel for schedule(static)
  for (int p = 0; p < k; ++p) {
    double* c = C + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = A[static_cast<size_t>(i) * k + p];
      if (av == 0.0) continue;
      const double* b = B + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

inline void conv1d_fwd(int L, int d, int w, int f, const double* in, const double* filt,
                       const double* bias, double* out) {
  const int Lp = L - w + 1;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < Lp; ++i)
    ref::conv1d_fwd(w, d, w, f, in + static_cast<size_t>(i) * d, filt, bias,
                    out + static_cast<size_t>(i) * f);
}

inline void col_max(int L, int f, const double* in, double* out, int* argmax) {
#pragma omp parallel for schedule(static)
  for (int j = 0; j < f; ++j) {
    double best = in[j];
    int arg = 0;
    for (int i = 1; i < L; ++i) {
      const double v = in[static_cast<size_t>(i) * f + j];
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    out[j] = best;
    argmax[j] = arg;
  }
}

inline void sigmoid(int n, const double* x, double* y) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

inline void tanh(int n, const double* x, double* y) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

inline void relu(int n, const double* x, double* y) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

inline void add(int n, const double* a, const double* b, double* y) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

inline void mul(int n, const double* a, const double* b, double* y) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

inline void axpy(int n, double a, const double* x, double* y) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace omp

inline bool parallel_ok() {
#ifdef _OPENMP
  return omp_get_max_threads() > 1 && !omp_in_parallel();
#else
  return false;
#endif
}

// ---- size-dispatching wrappers ----

inline void matmul_nn(int m, int k, int n, const double* A, const double* B, double* C) {
  if (parallel_ok() && static_cast<long>(m) * k * n >= kParallelCutoff && m > 1)
    omp::matmul_nn(m, k, n, A, B, C);
  else
    ref::matmul_nn(m, k, n, A, B, C);
}

inline void matmul_nt_acc(int m, int n, int k, const double* A, const double* B, double* C) {
  if (parallel_ok() && static_cast<long>(m) * n * k >= kParallelCutoff && m > 1)
    omp::matmul_nt_acc(m, n, k, A, B, C);
  else
    ref::matmul_nt_acc(m, n, k, A, B, C);
}

inline void matmul_tn_acc(int m, int k, int n, const double* A, const double* B, double* C) {
  if (parallel_ok() && static_cast<long>(m) * k * n >= kParallelCutoff && k > 1)
    omp::matmul_tn_acc(m, k, n, A, B, C);
  else
    ref::matmul_tn_acc(m, k, n, A, B, C);
}

inline void conv1d_fwd(int L, int d, int w, int f, const double* in, const double* filt,
                       const double* bias, double* out) {
  ref::conv1d_fwd(L, d, w, f, in, filt, bias, out);
}

inline void sigmoid(int n, const double* x, double* y) {
  if (parallel_ok() && n >= kParallelCutoff)
    omp::sigmoid(n, x, y);
  else
    ref::sigmoid(n, x, y);
}

inline void tanh(int n, const double* x, double* y) {
  if (parallel_ok() && n >= kParallelCutoff)
    omp::tanh(n, x, y);
  else
    ref::tanh(n, x, y);
}

inline void relu(int n, const double* x, double* y) {
  if (parallel_ok() && n >= kParallelCutoff)
    omp::relu(n, x, y);
  else
    ref::relu(n, x, y);
}

inline void add(int n, const double* a, const double* b, double* y) {
  if (parallel_ok() && n >= kParallelCutoff)
    omp::add(n, a, b, y);
  else
    ref::add(n, a, b, y);
}

inline void mul(int n, const double* a, const double* b, double* y) {
  if (parallel_ok() && n >= kParallelCutoff)
    omp::mul(n, a, b, y);
  else
    ref::mul(n, a, b, y);
}

inline void axpy(int n, double a, const double* x, double* y) {
  if (parallel_ok() && n >= kParallelCutoff)
    omp::axpy(n, a, x, y);
  else
    ref::axpy(n, a, x, y);
}

}  // namespace mtslam::kernels
