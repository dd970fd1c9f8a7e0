#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace mtslam {

struct KMeansResult {
  std::vector<int> assignment;                 // per point, 0..k-1
  std::vector<std::vector<double>> centroids;  // k rows
  std::vector<double> sse_trace;               // SSE after each Lloyd iteration
};

// Lloyd's algorithm with k-means++ seeding; stops after max_iters or when
// the SSE improvement drops below tol. Ties in assignment go to the lowest
// centroid index; empty clusters keep their previous centroid.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, uint64_t seed,
                    int max_iters = 100, double tol = 1e-9);

// Projection onto the top two principal components (Jacobi eigensolver on
// the covariance; deterministic sign convention).
std::vector<std::array<double, 2>> pca_2d(const std::vector<std::vector<double>>& points);

}  // namespace mtslam
