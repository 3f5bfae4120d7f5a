#pragma once

#include <cstddef>
#include <cstdint>

namespace fdna::kern {

// OpenMP kernels for the hot inner loops. Each output element is written by
// exactly one iteration and every scalar reduction uses the fixed chunk
// order from fdna/parallel.hpp, so results are bitwise identical for any
// thread count and match the serial twins in fdna::ref (tests assert this).

// probabilities sigma(F_r . W_k + b_k) for a block of rows against a bank
// F: rows x d, W: count x d, b: count, out: rows x count
void score_pairs(const double* fdna, std::size_t rows, std::size_t dim,
                 const double* bank_w, const double* bank_b,
                 std::size_t count, double* out_prob);

// nearest centroid per point (lowest index wins ties) and total inertia
// points: n x d, centroids: k x d
double kmeans_assign(const double* points, std::size_t n, std::size_t dim,
                     const double* centroids, std::size_t k, int* assignment);

// Student-t kernel normalizer Z = sum_{i != j} 1/(1 + |y_i - y_j|^2)
double tsne_partition(const double* y, std::size_t n);

// gradient of KL wrt y (2-D), with exaggeration applied to P
void tsne_gradient(const double* p, const double* y, std::size_t n,
                   double exaggeration, double z, double* grad);

// KL(P || Q) at the current layout, given Z
double tsne_kl(const double* p, const double* y, std::size_t n, double z);

// momentum step on a customer bank from a batch of item rows
// prob/labels: rows x count, F: rows x d; velocity same shape as bank
void customer_step(const double* fdna, std::size_t rows, std::size_t dim,
                   const double* prob, const std::uint8_t* labels,
                   double scale, double lr, double momentum, double l2,
                   double* bank_w, double* bank_b, double* vel_w,
                   double* vel_b, std::size_t count);

}  // namespace fdna::kern
