// Timings of the OpenMP kernels against their serial reference twins.
// Results must match bitwise (the unit tests assert that); this target
// reports the speedup.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "fdna/kernels.hpp"
#include "fdna/parallel.hpp"
#include "fdna/ref_kernels.hpp"
#include "fdna/rng.hpp"

using namespace fdna;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <class F>
double time_best_of(int repeats, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const double t0 = now_seconds();
    fn();
    best = std::min(best, now_seconds() - t0);
  }
  return best;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-18s serial %9.4f s   omp %9.4f s   speedup %.2fx\n", name,
              serial, parallel, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 3;
  std::printf("threads: %d, repeats: %d\n", par::resolved_threads(),
              repeats);

  Rng rng(1);

  {  // pair scoring: 512 items x 4096 customers x d=64
    const std::size_t rows = 512, dim = 64, count = 4096;
    std::vector<double> fdna(rows * dim), w(count * dim), b(count);
    for (double& v : fdna) v = rng.normal();
    for (double& v : w) v = rng.normal();
    for (double& v : b) v = rng.normal();
    std::vector<double> out(rows * count);
    const double serial = time_best_of(repeats, [&] {
      ref::score_pairs(fdna.data(), rows, dim, w.data(), b.data(), count,
                       out.data());
    });
    const double parallel = time_best_of(repeats, [&] {
      kern::score_pairs(fdna.data(), rows, dim, w.data(), b.data(), count,
                        out.data());
    });
    report("score_pairs", serial, parallel);
  }

  {  // k-means assignment: 200k points x 24 dims x 40 centroids
    const std::size_t n = 200000, dim = 24, k = 40;
    std::vector<double> points(n * dim), centroids(k * dim);
    for (double& v : points) v = rng.normal();
    for (double& v : centroids) v = rng.normal();
    std::vector<int> assign(n);
    const double serial = time_best_of(repeats, [&] {
      ref::kmeans_assign(points.data(), n, dim, centroids.data(), k,
                         assign.data());
    });
    const double parallel = time_best_of(repeats, [&] {
      kern::kmeans_assign(points.data(), n, dim, centroids.data(), k,
                          assign.data());
    });
    report("kmeans_assign", serial, parallel);
  }

  {  // t-SNE gradient: n = 3000 points
    const std::size_t n = 3000;
    std::vector<double> y(2 * n), p(n * n, 1.0 / (n * n));
    for (double& v : y) v = rng.normal();
    std::vector<double> grad(2 * n);
    double z = 0.0;
    const double serial = time_best_of(repeats, [&] {
      z = ref::tsne_partition(y.data(), n);
      ref::tsne_gradient(p.data(), y.data(), n, 1.0, z, grad.data());
    });
    const double parallel = time_best_of(repeats, [&] {
      z = kern::tsne_partition(y.data(), n);
      kern::tsne_gradient(p.data(), y.data(), n, 1.0, z, grad.data());
    });
    report("tsne_step", serial, parallel);
  }

  {  // customer bank update: 256 items x 8192 customers x d=32
    const std::size_t rows = 256, dim = 32, count = 8192;
    std::vector<double> fdna(rows * dim), prob(rows * count);
    std::vector<std::uint8_t> labels(rows * count);
    for (double& v : fdna) v = rng.normal();
    for (double& v : prob) v = rng.uniform();
    for (auto& v : labels) v = rng.uniform() < 0.1 ? 1 : 0;
    std::vector<double> w(count * dim, 0.01), b(count, -3.0),
        vw(count * dim, 0.0), vb(count, 0.0);
    const double scale = 1.0 / (rows * count);
    const double serial = time_best_of(repeats, [&] {
      ref::customer_step(fdna.data(), rows, dim, prob.data(), labels.data(),
                         scale, 0.1, 0.9, 1e-3, w.data(), b.data(),
                         vw.data(), vb.data(), count);
    });
    const double parallel = time_best_of(repeats, [&] {
      kern::customer_step(fdna.data(), rows, dim, prob.data(), labels.data(),
                          scale, 0.1, 0.9, 1e-3, w.data(), b.data(),
                          vw.data(), vb.data(), count);
    });
    report("customer_step", serial, parallel);
  }

  return 0;
}
