#pragma once

#include <cstdint>
#include <vector>

namespace fdna {

struct KMeansResult {
  std::vector<int> assignment;                  // per input point
  std::vector<std::vector<double>> centroids;   // k rows
  std::vector<double> inertia;                  // per Lloyd iteration
  int iterations = 0;
  bool converged = false;
};

// Lloyd's algorithm with k-means++ seeding. Deterministic under the seed:
// ties in nearest-centroid assignment break toward the lowest cluster index,
// empty clusters are re-seeded from the point farthest from its centroid.
// Throws data_error when k exceeds the number of distinct points.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    std::uint64_t seed, int max_iterations = 300);

}  // namespace fdna
