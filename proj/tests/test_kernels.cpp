#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "mtslam/kernels.hpp"
#include "mtslam/rng.hpp"

using namespace mtslam;

namespace {

std::vector<double> random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

// The OpenMP kernels split work over independent output elements only, so
// their results must match the serial reference bit for bit, not just to a
// tolerance.

TEST_CASE("omp matmul variants are bit-identical to the reference") {
  Rng rng(11);
  for (auto [m, k, n] : std::vector<std::array<int, 3>>{{3, 4, 2}, {64, 48, 80}, {257, 129, 65}}) {
    const auto A = random_vec(static_cast<size_t>(m) * k, rng);
    const auto B = random_vec(static_cast<size_t>(k) * n, rng);
    std::vector<double> c_ref(static_cast<size_t>(m) * n), c_omp(static_cast<size_t>(m) * n);
    kernels::ref::matmul_nn(m, k, n, A.data(), B.data(), c_ref.data());
    kernels::omp::matmul_nn(m, k, n, A.data(), B.data(), c_omp.data());
    CHECK(c_ref == c_omp);

    // nt: C[m x k] += A'[m x n] * B'[k x n]^T
    const auto G = random_vec(static_cast<size_t>(m) * n, rng);
    std::vector<double> da_ref = random_vec(static_cast<size_t>(m) * k, rng);
    std::vector<double> da_omp = da_ref;
    kernels::ref::matmul_nt_acc(m, n, k, G.data(), B.data(), da_ref.data());
    kernels::omp::matmul_nt_acc(m, n, k, G.data(), B.data(), da_omp.data());
    CHECK(da_ref == da_omp);

    std::vector<double> db_ref = random_vec(static_cast<size_t>(k) * n, rng);
    std::vector<double> db_omp = db_ref;
    kernels::ref::matmul_tn_acc(m, k, n, A.data(), G.data(), db_ref.data());
    kernels::omp::matmul_tn_acc(m, k, n, A.data(), G.data(), db_omp.data());
    CHECK(db_ref == db_omp);
  }
}

TEST_CASE("omp elementwise kernels are bit-identical to the reference") {
  Rng rng(12);
  for (int n : {7, 1024, 100003}) {
    const auto x = random_vec(static_cast<size_t>(n), rng);
    const auto y = random_vec(static_cast<size_t>(n), rng);
    std::vector<double> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));

    kernels::ref::sigmoid(n, x.data(), a.data());
    kernels::omp::sigmoid(n, x.data(), b.data());
    CHECK(a == b);
    kernels::ref::tanh(n, x.data(), a.data());
    kernels::omp::tanh(n, x.data(), b.data());
    CHECK(a == b);
    kernels::ref::relu(n, x.data(), a.data());
    kernels::omp::relu(n, x.data(), b.data());
    CHECK(a == b);
    kernels::ref::add(n, x.data(), y.data(), a.data());
    kernels::omp::add(n, x.data(), y.data(), b.data());
    CHECK(a == b);
    kernels::ref::mul(n, x.data(), y.data(), a.data());
    kernels::omp::mul(n, x.data(), y.data(), b.data());
    CHECK(a == b);

    std::vector<double> acc_a = y, acc_b = y;
    kernels::ref::axpy(n, 0.37, x.data(), acc_a.data());
    kernels::omp::axpy(n, 0.37, x.data(), acc_b.data());
    CHECK(acc_a == acc_b);
  }
}

TEST_CASE("omp conv1d and column max are bit-identical to the reference") {
  Rng rng(13);
  const int L = 40, d = 16, w = 3, f = 24;
  const auto in = random_vec(static_cast<size_t>(L) * d, rng);
  const auto filt = random_vec(static_cast<size_t>(w) * d * f, rng);
  const auto bias = random_vec(static_cast<size_t>(f), rng);
  const int Lp = L - w + 1;
  std::vector<double> out_ref(static_cast<size_t>(Lp) * f), out_omp(static_cast<size_t>(Lp) * f);
  kernels::ref::conv1d_fwd(L, d, w, f, in.data(), filt.data(), bias.data(), out_ref.data());
  kernels::omp::conv1d_fwd(L, d, w, f, in.data(), filt.data(), bias.data(), out_omp.data());
  CHECK(out_ref == out_omp);

  std::vector<double> mx_ref(static_cast<size_t>(f)), mx_omp(static_cast<size_t>(f));
  std::vector<int> arg_ref(static_cast<size_t>(f)), arg_omp(static_cast<size_t>(f));
  kernels::ref::col_max(Lp, f, out_ref.data(), mx_ref.data(), arg_ref.data());
  kernels::omp::col_max(Lp, f, out_omp.data(), mx_omp.data(), arg_omp.data());
  CHECK(mx_ref == mx_omp);
  CHECK(arg_ref == arg_omp);
}

TEST_CASE("col_max takes the first maximal row on ties") {
  std::vector<double> in{1.0, 5.0, 5.0, 2.0, 5.0, 0.0};  // 3 rows x 2 cols
  std::vector<double> out(2);
  std::vector<int> arg(2);
  kernels::ref::col_max(3, 2, in.data(), out.data(), arg.data());
  CHECK(out == std::vector<double>{5.0, 5.0});
  CHECK(arg == std::vector<int>{1, 0});
}

TEST_CASE("dispatching wrappers agree with the reference across the cutoff") {
  Rng rng(14);
  for (int m : {2, 96}) {
    const int k = 97, n = 101;
    const auto A = random_vec(static_cast<size_t>(m) * k, rng);
    const auto B = random_vec(static_cast<size_t>(k) * n, rng);
    std::vector<double> c_ref(static_cast<size_t>(m) * n), c_any(static_cast<size_t>(m) * n);
    kernels::ref::matmul_nn(m, k, n, A.data(), B.data(), c_ref.data());
    kernels::matmul_nn(m, k, n, A.data(), B.data(), c_any.data());
    CHECK(c_ref == c_any);
  }
}
