#pragma once

#include <cstddef>
#include <cstdint>

namespace fdna::ref {

// Serial reference implementations of the fdna::kern kernels, written as
// straight-line loops with no dependence on the parallel runtime. They keep
// the same canonical accumulation order (fixed 64-chunk partial sums,
// ascending), so the OpenMP kernels must match them bitwise at any thread
// count. Used by tests and the benchmark, not by the pipeline.

void score_pairs(const double* fdna, std::size_t rows, std::size_t dim,
                 const double* bank_w, const double* bank_b,
                 std::size_t count, double* out_prob);

double kmeans_assign(const double* points, std::size_t n, std::size_t dim,
                     const double* centroids, std::size_t k, int* assignment);

double tsne_partition(const double* y, std::size_t n);

void tsne_gradient(const double* p, const double* y, std::size_t n,
                   double exaggeration, double z, double* grad);

double tsne_kl(const double* p, const double* y, std::size_t n, double z);

void customer_step(const double* fdna, std::size_t rows, std::size_t dim,
                   const double* prob, const std::uint8_t* labels,
                   double scale, double lr, double momentum, double l2,
                   double* bank_w, double* bank_b, double* vel_w,
                   double* vel_b, std::size_t count);

}  // namespace fdna::ref
