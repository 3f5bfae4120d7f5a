#include "fdna/ref_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fdna/mathutil.hpp"

namespace fdna::ref {

namespace {

constexpr std::size_t kChunks = 64;  // canonical reduction width, mirrors fdna::par

// canonical chunked sum: partials over fixed ranges, added in ascending order
template <class F>
double chunked_sum(std::size_t n, F&& value) {
  if (n == 0) return 0.0;
  const std::size_t nc = std::min(kChunks, n);
  std::vector<double> partial(nc, 0.0);
  for (std::size_t c = 0; c < nc; ++c) {
    double acc = 0.0;
    const std::size_t b = c * n / nc;
    const std::size_t e = (c + 1) * n / nc;
    for (std::size_t i = b; i < e; ++i) acc += value(i);
    partial[c] = acc;
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace

void score_pairs(const double* fdna, std::size_t rows, std::size_t dim,
                 const double* bank_w, const double* bank_b,
                 std::size_t count, double* out_prob) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* f = fdna + r * dim;
    double* out = out_prob + r * count;
    for (std::size_t j = 0; j < count; ++j) {
      out[j] = sigmoid(dot(f, bank_w + j * dim, dim) + bank_b[j]);
    }
  }
}

double kmeans_assign(const double* points, std::size_t n, std::size_t dim,
                     const double* centroids, std::size_t k,
                     int* assignment) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = points + i * dim;
    int best = 0;
    double best_d = squared_distance(p, centroids, dim);
    for (std::size_t c = 1; c < k; ++c) {
      const double d = squared_distance(p, centroids + c * dim, dim);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    assignment[i] = best;
  }
  return chunked_sum(n, [&](std::size_t i) {
    const double* p = points + i * dim;
    return squared_distance(
        p, centroids + static_cast<std::size_t>(assignment[i]) * dim, dim);
  });
}

double tsne_partition(const double* y, std::size_t n) {
  return chunked_sum(n, [&](std::size_t i) {
    const double yi0 = y[2 * i], yi1 = y[2 * i + 1];
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d0 = yi0 - y[2 * j];
      const double d1 = yi1 - y[2 * j + 1];
      row += 1.0 / (1.0 + d0 * d0 + d1 * d1);
    }
    return row;
  });
}

void tsne_gradient(const double* p, const double* y, std::size_t n,
                   double exaggeration, double z, double* grad) {
  for (std::size_t i = 0; i < n; ++i) {
    const double yi0 = y[2 * i], yi1 = y[2 * i + 1];
    double g0 = 0.0, g1 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d0 = yi0 - y[2 * j];
      const double d1 = yi1 - y[2 * j + 1];
      const double w = 1.0 / (1.0 + d0 * d0 + d1 * d1);
      const double mult = (exaggeration * p[i * n + j] - w / z) * w;
      g0 += mult * d0;
      g1 += mult * d1;
    }
    grad[2 * i] = 4.0 * g0;
    grad[2 * i + 1] = 4.0 * g1;
  }
}

double tsne_kl(const double* p, const double* y, std::size_t n, double z) {
  return chunked_sum(n, [&](std::size_t i) {
    const double yi0 = y[2 * i], yi1 = y[2 * i + 1];
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double pij = p[i * n + j];
      if (pij <= 0.0) continue;
      const double d0 = yi0 - y[2 * j];
      const double d1 = yi1 - y[2 * j + 1];
      const double q = (1.0 / (1.0 + d0 * d0 + d1 * d1)) / z;
      row += pij * std::log(pij / std::max(q, 1e-300));
    }
    return row;
  });
}

void customer_step(const double* fdna, std::size_t rows, std::size_t dim,
                   const double* prob, const std::uint8_t* labels,
                   double scale, double lr, double momentum, double l2,
                   double* bank_w, double* bank_b, double* vel_w,
                   double* vel_b, std::size_t count) {
  for (std::size_t j = 0; j < count; ++j) {
    double* w = bank_w + j * dim;
    double* vw = vel_w + j * dim;
    for (std::size_t t = 0; t < dim; ++t) {
      vw[t] = momentum * vw[t] - lr * l2 * w[t];
    }
    double gb = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double g = (prob[r * count + j] -
                        static_cast<double>(labels[r * count + j])) *
                       scale;
      gb += g;
      const double* f = fdna + r * dim;
      for (std::size_t t = 0; t < dim; ++t) vw[t] -= lr * g * f[t];
    }
    for (std::size_t t = 0; t < dim; ++t) w[t] += vw[t];
    vel_b[j] = momentum * vel_b[j] - lr * gb;
    bank_b[j] += vel_b[j];
  }
}

}  // namespace fdna::ref
