#pragma once

#include <functional>

#include "mtslam/error.hpp"
#include "mtslam/params.hpp"
#include "mtslam/tape.hpp"

namespace mtslam {

// Central-difference gradient verification. `build` must construct a scalar
// loss from the current parameter values on the given tape, and must be
// deterministic (run dropout in eval mode); that is checked by evaluating
// the unperturbed point twice. Returns the max over all parameter
// coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
inline double grad_check(const std::function<Var(Tape&)>& build, ParamStore& params, double eps) {
  Tape tape;
  Var loss = build(tape);
  GradBuffer analytic(params.count());
  tape.backward(loss, &analytic);

  auto eval = [&]() {
    Tape t;
    return t.value(build(t)).data[0];
  };
  const double f0 = eval();
  if (eval() != f0) throw ContractError("grad_check: function is not deterministic");

  double max_rel = 0.0;
  for (int p = 0; p < params.count(); ++p) {
    const Tensor a = analytic.materialize(params, p);
    Tensor& w = params.value(p);
    for (int i = 0; i < w.size(); ++i) {
      const double keep = w.data[static_cast<size_t>(i)];
      w.data[static_cast<size_t>(i)] = keep + eps;
      const double fp = eval();
      w.data[static_cast<size_t>(i)] = keep - eps;
      const double fm = eval();
      w.data[static_cast<size_t>(i)] = keep;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double an = a.data[static_cast<size_t>(i)];
      const double denom = std::max(1e-8, std::abs(an) + std::abs(numeric));
      const double rel = std::abs(an - numeric) / denom;
      if (rel > max_rel) max_rel = rel;
    }
  }
  return max_rel;
}

}  // namespace mtslam
