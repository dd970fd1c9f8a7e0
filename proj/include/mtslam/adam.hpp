#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mtslam/error.hpp"
#include "mtslam/params.hpp"
#include "mtslam/tensor.hpp"

namespace mtslam {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators, one pair per parameter, plus the shared
// step counter. Moment shapes always mirror the parameter shapes.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  int64_t t = 0;
  AdamConfig hp;

  static AdamState init(const ParamStore& store, AdamConfig hp = {}) {
    AdamState s;
    s.hp = hp;
    s.m = make_grad_accumulator(store);
    s.v = make_grad_accumulator(store);
    return s;
  }
};

// One Adam update with bias correction over every parameter in the store.
inline void adam_step(ParamStore& params, const std::vector<Tensor>& grads, AdamState& state) {
  if (static_cast<int>(grads.size()) != params.count() ||
      static_cast<int>(state.m.size()) != params.count())
    throw ContractError("adam_step: parameter/gradient/state counts disagree");
  state.t += 1;
  const double b1 = state.hp.beta1;
  const double b2 = state.hp.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (int p = 0; p < params.count(); ++p) {
    Tensor& w = params.value(p);
    const Tensor& g = grads[static_cast<size_t>(p)];
    if (!w.same_shape(g) || !w.same_shape(state.m[static_cast<size_t>(p)]))
      throw ContractError("adam_step: shape mismatch on parameter " + params[p].name);
    double* mp = state.m[static_cast<size_t>(p)].data.data();
    double* vp = state.v[static_cast<size_t>(p)].data.data();
    double* wp = w.data.data();
    const double* gp = g.data.data();
    const int n = w.size();
    for (int i = 0; i < n; ++i) {
      mp[i] = b1 * mp[i] + (1.0 - b1) * gp[i];
      vp[i] = b2 * vp[i] + (1.0 - b2) * gp[i] * gp[i];
      const double mhat = mp[i] / corr1;
      const double vhat = vp[i] / corr2;
      wp[i] -= state.hp.lr * mhat / (std::sqrt(vhat) + state.hp.eps);
    }
  }
}

// Scales gradients so the global L2 norm is at most max_norm.
// Returns the pre-clip norm.
inline double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double x : g.data) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Tensor& g : grads)
      for (double& x : g.data) x *= s;
  }
  return norm;
}

}  // namespace mtslam
