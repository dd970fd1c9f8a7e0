#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mtslam/error.hpp"

namespace mtslam {

// Dense row-major matrix of doubles. Rank is at most 2; vectors are
// represented as a single row (1 x n). This is the plain value type; tracked
// computations live on a Tape (tape.hpp) and reference tensors by node id.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {
    if (r <= 0 || c <= 0) throw DimError("tensor dims must be positive");
  }
  Tensor(int r, int c, std::vector<double> v) : rows(r), cols(c), data(std::move(v)) {
    if (r <= 0 || c <= 0) throw DimError("tensor dims must be positive");
    if (data.size() != static_cast<size_t>(r) * c)
      throw DimError("tensor value count does not match shape");
  }

  static Tensor row(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return Tensor(1, n, std::move(v));
  }

  int size() const { return rows * cols; }
  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }
};

inline double linf_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimError("linf_diff: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  double m = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double d = std::abs(a.data[i] - b.data[i]);
    if (d > m) m = d;
  }
  return m;
}

}  // namespace mtslam
