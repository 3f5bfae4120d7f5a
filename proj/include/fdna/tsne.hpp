#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fdna/purchases.hpp"
#include "fdna/similarity.hpp"

namespace fdna {

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration_factor = 12.0;
  int early_exaggeration_iters = 250;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  int momentum_switch_iter = 250;
  std::uint64_t seed = 0;
  bool cosine_input = false;  // input distances, default Euclidean
  // momentum off after the exaggeration phase + step halving whenever KL
  // would increase, so the plain phase is monotone
  bool test_mode = false;
};

struct MapResult {
  std::vector<std::array<double, 2>> coordinates;
  std::vector<double> kl_history;  // true KL at the start of each iteration
};

// Exact O(n^2) t-SNE. Affinities come from conditional Gaussians whose
// per-point bandwidth solves the perplexity equation by binary search
// (entropy tolerance 1e-5); the low-dimensional kernel is Student-t.
// Internally points are processed in content-hash order, so the output is
// exactly equivariant under input reordering. Throws data_error for
// degenerate input (a point with all-zero distances) or an infeasible
// perplexity.
MapResult tsne(const std::vector<std::vector<double>>& points,
               const TsneConfig& config);

// Diagnostics used by tests: bandwidths (beta = 1/(2 sigma^2)) and the
// symmetric affinity matrix in input order.
struct TsneAffinities {
  std::vector<double> beta;
  std::vector<double> p;  // n x n, symmetric, sums to 1
};
TsneAffinities tsne_affinities(const std::vector<std::vector<double>>& points,
                               double perplexity, bool cosine_input = false);

// Uniform sample (without replacement) of n items with at least min_sales
// purchases; items absent from the matrix count zero sales.
std::vector<std::string> sample_items(const EmbeddingStore& store,
                                      std::size_t n, std::size_t min_sales,
                                      const PurchaseMatrix& purchases,
                                      std::uint64_t seed);

}  // namespace fdna
