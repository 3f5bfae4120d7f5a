#include "fdna/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "fdna/errors.hpp"
#include "fdna/kernels.hpp"
#include "fdna/mathutil.hpp"
#include "fdna/rng.hpp"

namespace fdna {

namespace {

std::size_t count_distinct(const std::vector<std::vector<double>>& points) {
  std::set<std::vector<double>> seen(points.begin(), points.end());
  return seen.size();
}

// k-means++ seeding: first centroid uniform, the rest by squared-distance
// weighted sampling
std::vector<std::vector<double>> seed_centroids(
    const std::vector<std::vector<double>>& points, int k, Rng& rng) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  centroids.push_back(points[rng.uniform_int(n)]);

  std::vector<double> best_d2(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    best_d2[i] = squared_distance(points[i].data(), centroids[0].data(),
                                  points[i].size());
  }
  while (centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (double v : best_d2) total += v;
    std::size_t pick = n;  // sentinel
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cum += best_d2[i];
        if (r < cum) {
          pick = i;
          break;
        }
      }
    }
    if (pick == n) {
      // rounding tail or all-zero weights: last point with positive weight,
      // else first point not yet chosen
      for (std::size_t i = n; i-- > 0;) {
        if (best_d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick == n) pick = centroids.size() % n;
    }
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      best_d2[i] = std::min(
          best_d2[i], squared_distance(points[i].data(),
                                       centroids.back().data(),
                                       points[i].size()));
    }
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    std::uint64_t seed, int max_iterations) {
  if (points.empty()) throw data_error("kmeans: no points");
  if (k < 1) throw data_error("kmeans: k must be positive");
  const std::size_t dim = points[0].size();
  for (const auto& p : points) {
    if (p.size() != dim) throw data_error("kmeans: inconsistent dimensions");
  }
  if (static_cast<std::size_t>(k) > count_distinct(points)) {
    throw data_error("kmeans: k=" + std::to_string(k) +
                     " exceeds distinct point count");
  }

  const std::size_t n = points.size();
  std::vector<double> flat(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(points[i].begin(), points[i].end(), flat.begin() + i * dim);
  }

  Rng rng(seed);
  auto centroids = seed_centroids(points, k, rng);
  std::vector<double> cent_flat(static_cast<std::size_t>(k) * dim);

  KMeansResult result;
  result.assignment.assign(n, -1);
  std::vector<int> prev(n, -1);

  for (int iter = 0; iter < max_iterations; ++iter) {
    for (int c = 0; c < k; ++c) {
      std::copy(centroids[c].begin(), centroids[c].end(),
                cent_flat.begin() + static_cast<std::size_t>(c) * dim);
    }
    double inertia = kern::kmeans_assign(flat.data(), n, dim,
                                         cent_flat.data(),
                                         static_cast<std::size_t>(k),
                                         result.assignment.data());

    // re-seed empty clusters from the point farthest from its centroid;
    // bounded rescan because a reassignment may empty another cluster
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int pass = 0; pass < k; ++pass) {
      sizes.assign(static_cast<std::size_t>(k), 0);
      for (int a : result.assignment) ++sizes[static_cast<std::size_t>(a)];
      int empty = -1;
      for (int c = 0; c < k; ++c) {
        if (sizes[static_cast<std::size_t>(c)] == 0) {
          empty = c;
          break;
        }
      }
      if (empty < 0) break;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const int a = result.assignment[i];
        if (sizes[static_cast<std::size_t>(a)] <= 1) continue;
        const double d = squared_distance(
            flat.data() + i * dim,
            cent_flat.data() + static_cast<std::size_t>(a) * dim, dim);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centroids[empty] = points[far];
      std::copy(centroids[empty].begin(), centroids[empty].end(),
                cent_flat.begin() + static_cast<std::size_t>(empty) * dim);
      inertia = kern::kmeans_assign(flat.data(), n, dim, cent_flat.data(),
                                    static_cast<std::size_t>(k),
                                    result.assignment.data());
    }
    sizes.assign(static_cast<std::size_t>(k), 0);
    for (int a : result.assignment) ++sizes[static_cast<std::size_t>(a)];

    if (!result.inertia.empty() &&
        inertia > result.inertia.back() * (1.0 + 1e-12) + 1e-15) {
      throw numeric_error("kmeans: inertia increased at iteration " +
                          std::to_string(iter));
    }
    result.inertia.push_back(inertia);
    result.iterations = iter + 1;

    if (result.assignment == prev) {
      result.converged = true;
      break;
    }
    prev = result.assignment;

    // mean update; an empty cluster keeps its centroid
    std::vector<std::vector<double>> sums(
        static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      auto& acc = sums[static_cast<std::size_t>(result.assignment[i])];
      const double* p = flat.data() + i * dim;
      for (std::size_t t = 0; t < dim; ++t) acc[t] += p[t];
    }
    for (int c = 0; c < k; ++c) {
      const std::size_t cnt = sizes[static_cast<std::size_t>(c)];
      if (cnt == 0) continue;
      for (std::size_t t = 0; t < dim; ++t) {
        centroids[static_cast<std::size_t>(c)][t] =
            sums[static_cast<std::size_t>(c)][t] / static_cast<double>(cnt);
      }
    }
  }

  result.centroids = std::move(centroids);
  return result;
}

}  // namespace fdna
