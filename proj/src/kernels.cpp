#include "fdna/kernels.hpp"

#include <cmath>
#include <limits>

#include "fdna/mathutil.hpp"
#include "fdna/parallel.hpp"

namespace fdna::kern {

void score_pairs(const double* fdna, std::size_t rows, std::size_t dim,
                 const double* bank_w, const double* bank_b,
                 std::size_t count, double* out_prob) {
  par::for_each(rows, [&](std::size_t r) {
    const double* f = fdna + r * dim;
    double* out = out_prob + r * count;
    for (std::size_t j = 0; j < count; ++j) {
      out[j] = sigmoid(dot(f, bank_w + j * dim, dim) + bank_b[j]);
    }
  });
}

double kmeans_assign(const double* points, std::size_t n, std::size_t dim,
                     const double* centroids, std::size_t k,
                     int* assignment) {
  par::for_each(n, [&](std::size_t i) {
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
  });
  return par::sum(n, [&](std::size_t i) {
    const double* p = points + i * dim;
    return squared_distance(
        p, centroids + static_cast<std::size_t>(assignment[i]) * dim, dim);
  });
}

double tsne_partition(const double* y, std::size_t n) {
  return par::sum(n, [&](std::size_t i) {
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
  par::for_each(n, [&](std::size_t i) {
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
  });
}

double tsne_kl(const double* p, const double* y, std::size_t n, double z) {
  return par::sum(n, [&](std::size_t i) {
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
  par::for_each(count, [&](std::size_t j) {
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
  });
}

}  // namespace fdna::kern
