#include "mtslam/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtslam/error.hpp"
#include "mtslam/rng.hpp"

namespace mtslam {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, uint64_t seed,
                    int max_iters, double tol) {
  const int n = static_cast<int>(points.size());
  if (k < 1) throw InputError("kmeans: k must be >= 1");
  if (n < k) throw InputError("kmeans: k exceeds the number of points");
  Rng rng(mix64(seed, 0x6b6dULL));

  // k-means++ seeding
  KMeansResult res;
  res.centroids.push_back(points[rng.below(static_cast<uint64_t>(n))]);
  std::vector<double> d2(static_cast<size_t>(n), 0.0);
  while (static_cast<int>(res.centroids.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : res.centroids) best = std::min(best, sq_dist(points[static_cast<size_t>(i)], c));
      d2[static_cast<size_t>(i)] = best;
      total += best;
    }
    int pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[static_cast<size_t>(i)];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
    }
    res.centroids.push_back(points[static_cast<size_t>(pick)]);
  }

  res.assignment.assign(static_cast<size_t>(n), 0);
  double prev_sse = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int c = 0; c < k; ++c) {
        const double d = sq_dist(points[static_cast<size_t>(i)], res.centroids[static_cast<size_t>(c)]);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      res.assignment[static_cast<size_t>(i)] = arg;
      sse += best;
    }
    res.sse_trace.push_back(sse);

    const size_t dim = points[0].size();
    std::vector<std::vector<double>> sums(static_cast<size_t>(k), std::vector<double>(dim, 0.0));
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      const int c = res.assignment[static_cast<size_t>(i)];
      ++counts[static_cast<size_t>(c)];
      for (size_t j = 0; j < dim; ++j) sums[static_cast<size_t>(c)][j] += points[static_cast<size_t>(i)][j];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] == 0) continue;  // keep previous centroid
      for (size_t j = 0; j < dim; ++j)
        res.centroids[static_cast<size_t>(c)][j] =
            sums[static_cast<size_t>(c)][j] / static_cast<double>(counts[static_cast<size_t>(c)]);
    }
    if (prev_sse - sse < tol) break;
    prev_sse = sse;
  }
  return res;
}

std::vector<std::array<double, 2>> pca_2d(const std::vector<std::vector<double>>& points) {
  const int n = static_cast<int>(points.size());
  if (n == 0) throw InputError("pca: no points");
  const int d = static_cast<int>(points[0].size());
  std::vector<double> mean(static_cast<size_t>(d), 0.0);
  for (const auto& p : points)
    for (int j = 0; j < d; ++j) mean[static_cast<size_t>(j)] += p[static_cast<size_t>(j)];
  for (double& m : mean) m /= static_cast<double>(n);

  // covariance (upper triangle mirrored)
  std::vector<double> cov(static_cast<size_t>(d) * d, 0.0);
  for (const auto& p : points)
    for (int a = 0; a < d; ++a) {
      const double xa = p[static_cast<size_t>(a)] - mean[static_cast<size_t>(a)];
      for (int b = a; b < d; ++b)
        cov[static_cast<size_t>(a) * d + b] += xa * (p[static_cast<size_t>(b)] - mean[static_cast<size_t>(b)]);
    }
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      cov[static_cast<size_t>(a) * d + b] /= denom;
      cov[static_cast<size_t>(b) * d + a] = cov[static_cast<size_t>(a) * d + b];
    }

  // cyclic Jacobi
  std::vector<double> V(static_cast<size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) V[static_cast<size_t>(i) * d + i] = 1.0;
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < d; ++p)
      for (int q = p + 1; q < d; ++q) off += cov[static_cast<size_t>(p) * d + q] * cov[static_cast<size_t>(p) * d + q];
    if (off < 1e-24) break;
    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) {
        const double apq = cov[static_cast<size_t>(p) * d + q];
        if (std::abs(apq) < 1e-300) continue;
        const double app = cov[static_cast<size_t>(p) * d + p];
        const double aqq = cov[static_cast<size_t>(q) * d + q];
        const double theta = 0.5 * (aqq - app) / apq;
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < d; ++i) {
          const double aip = cov[static_cast<size_t>(i) * d + p];
          const double aiq = cov[static_cast<size_t>(i) * d + q];
          cov[static_cast<size_t>(i) * d + p] = c * aip - s * aiq;
          cov[static_cast<size_t>(i) * d + q] = s * aip + c * aiq;
        }
        for (int i = 0; i < d; ++i) {
          const double api = cov[static_cast<size_t>(p) * d + i];
          const double aqi = cov[static_cast<size_t>(q) * d + i];
          cov[static_cast<size_t>(p) * d + i] = c * api - s * aqi;
          cov[static_cast<size_t>(q) * d + i] = s * api + c * aqi;
        }
        for (int i = 0; i < d; ++i) {
          const double vip = V[static_cast<size_t>(i) * d + p];
          const double viq = V[static_cast<size_t>(i) * d + q];
          V[static_cast<size_t>(i) * d + p] = c * vip - s * viq;
          V[static_cast<size_t>(i) * d + q] = s * vip + c * viq;
        }
      }
    }
  }

  // top-2 eigenvalues
  std::vector<std::pair<double, int>> eig;
  eig.reserve(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) eig.emplace_back(cov[static_cast<size_t>(i) * d + i], i);
  std::sort(eig.begin(), eig.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  std::array<std::vector<double>, 2> axes;
  for (int a = 0; a < 2; ++a) {
    axes[static_cast<size_t>(a)].resize(static_cast<size_t>(d), 0.0);
    const int col = d > 1 ? eig[static_cast<size_t>(a)].second : eig[0].second;
    double biggest = 0.0;
    int arg = 0;
    for (int i = 0; i < d; ++i) {
      axes[static_cast<size_t>(a)][static_cast<size_t>(i)] = V[static_cast<size_t>(i) * d + col];
      if (std::abs(axes[static_cast<size_t>(a)][static_cast<size_t>(i)]) > biggest) {
        biggest = std::abs(axes[static_cast<size_t>(a)][static_cast<size_t>(i)]);
        arg = i;
      }
    }
    if (axes[static_cast<size_t>(a)][static_cast<size_t>(arg)] < 0)  // sign convention
      for (double& x : axes[static_cast<size_t>(a)]) x = -x;
  }

  std::vector<std::array<double, 2>> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 2; ++a) {
      double s = 0.0;
      for (int j = 0; j < d; ++j)
        s += (points[static_cast<size_t>(i)][static_cast<size_t>(j)] - mean[static_cast<size_t>(j)]) *
             axes[static_cast<size_t>(a)][static_cast<size_t>(j)];
      out[static_cast<size_t>(i)][static_cast<size_t>(a)] = s;
    }
  return out;
}

}  // namespace mtslam
