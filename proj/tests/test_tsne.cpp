#include <doctest.h>

#include <cmath>
#include <vector>

#include "fdna/errors.hpp"
#include "fdna/kmeans.hpp"
#include "fdna/rng.hpp"
#include "fdna/tsne.hpp"
#include "helpers.hpp"

using namespace fdna;

namespace {

std::vector<std::vector<double>> two_gaussians(std::size_t per_cluster,
                                               std::size_t dim,
                                               double separation,
                                               std::uint64_t seed,
                                               std::vector<int>* labels) {
  Rng rng(seed);
  std::vector<std::vector<double>> points;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < per_cluster; ++i) {
      std::vector<double> p(dim);
      for (std::size_t t = 0; t < dim; ++t) {
        p[t] = rng.normal() + (c == 1 && t == 0 ? separation : 0.0);
      }
      points.push_back(std::move(p));
      if (labels) labels->push_back(static_cast<int>(c));
    }
  }
  return points;
}

}  // namespace

TEST_SUITE("tsne") {

TEST_CASE("affinities are symmetric, non-negative, and sum to one") {
  std::vector<int> labels;
  const auto points = two_gaussians(30, 5, 4.0, 11, &labels);
  const TsneAffinities aff = tsne_affinities(points, 12.0);
  const std::size_t n = points.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double pij = aff.p[i * n + j];
      CHECK(pij >= 0.0);
      CHECK(pij == aff.p[j * n + i]);
      total += pij;
    }
  }
  CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("per-point bandwidths reproduce the target perplexity") {
  const auto points = two_gaussians(40, 8, 3.0, 4, nullptr);
  const double perplexity = 14.0;
  const TsneAffinities aff = tsne_affinities(points, perplexity);
  const std::size_t n = points.size();

  // recompute each conditional distribution from the solved beta and check
  // exp(H) against the requested perplexity
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> w(n, 0.0);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (std::size_t t = 0; t < points[i].size(); ++t) {
        const double diff = points[i][t] - points[j][t];
        d2 += diff * diff;
      }
      w[j] = std::exp(-aff.beta[i] * d2);
      sum += w[j];
    }
    double entropy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || w[j] <= 0.0) continue;
      const double pji = w[j] / sum;
      entropy -= pji * std::log(pji);
    }
    CHECK(std::abs(std::exp(entropy) - perplexity) / perplexity < 1e-3);
  }
}

TEST_CASE("KL history is non-increasing in the plain phase under test "
          "mode") {
  const auto points = two_gaussians(40, 6, 3.0, 9, nullptr);
  TsneConfig config;
  config.perplexity = 10.0;
  config.iterations = 160;
  config.early_exaggeration_iters = 40;
  config.learning_rate = 100.0;
  config.seed = 2;
  config.test_mode = true;
  const MapResult result = tsne(points, config);
  REQUIRE(result.kl_history.size() == 160);
  for (double kl : result.kl_history) CHECK(kl >= -1e-12);
  for (std::size_t t = 41; t < result.kl_history.size(); ++t) {
    CHECK(result.kl_history[t] <= result.kl_history[t - 1] + 1e-12);
  }
}

TEST_CASE("two separated clusters are recovered in the embedding") {
  std::vector<int> labels;
  const auto points = two_gaussians(100, 16, 8.0, 21, &labels);
  TsneConfig config;
  config.perplexity = 30.0;
  config.iterations = 400;
  config.early_exaggeration_iters = 100;
  config.seed = 5;
  const MapResult result = tsne(points, config);

  std::vector<std::vector<double>> coords;
  for (const auto& c : result.coordinates) {
    coords.push_back({c[0], c[1]});
  }
  const KMeansResult clusters = kmeans(coords, 2, 77);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    agree += clusters.assignment[i] == labels[i] ? 1 : 0;
  }
  const double rate =
      std::max(agree, labels.size() - agree) /
      static_cast<double>(labels.size());
  CHECK(rate >= 0.95);
}

TEST_CASE("identical points are rejected as degenerate") {
  std::vector<std::vector<double>> points(10,
                                          std::vector<double>{1.0, 2.0});
  TsneConfig config;
  config.perplexity = 2.0;
  CHECK_THROWS_AS(tsne(points, config), data_error);
}

TEST_CASE("infeasible perplexity is rejected") {
  const auto points = two_gaussians(5, 3, 2.0, 1, nullptr);  // n = 10
  TsneConfig config;
  config.perplexity = 3.0;  // (n-1)/3 = 3 exactly: not allowed
  CHECK_THROWS_AS(tsne(points, config), data_error);
  CHECK_THROWS_AS(tsne_affinities(points, 100.0), data_error);
}

TEST_CASE("deterministic under a fixed seed") {
  const auto points = two_gaussians(25, 4, 3.0, 6, nullptr);
  TsneConfig config;
  config.perplexity = 8.0;
  config.iterations = 60;
  config.early_exaggeration_iters = 20;
  config.seed = 31;
  const MapResult a = tsne(points, config);
  const MapResult b = tsne(points, config);
  CHECK(a.coordinates == b.coordinates);
  CHECK(a.kl_history == b.kl_history);
}

TEST_CASE("output is exactly equivariant under input reordering") {
  const auto points = two_gaussians(20, 5, 3.0, 13, nullptr);
  TsneConfig config;
  config.perplexity = 8.0;
  config.iterations = 50;
  config.early_exaggeration_iters = 15;
  config.seed = 77;
  const MapResult base = tsne(points, config);

  // reverse the input order
  std::vector<std::vector<double>> reversed(points.rbegin(), points.rend());
  const MapResult flipped = tsne(reversed, config);
  const std::size_t n = points.size();
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(flipped.coordinates[n - 1 - i] == base.coordinates[i]);
  }
  CHECK(flipped.kl_history == base.kl_history);
}

TEST_CASE("item sampling respects the minimum sales filter") {
  EmbeddingStore store;
  for (int i = 0; i < 30; ++i) {
    store.add("i" + std::to_string(i), std::vector<double>{1.0, double(i)});
  }
  store.finalize();

  std::vector<std::string> items, customers;
  for (int i = 0; i < 30; ++i) items.push_back("i" + std::to_string(i));
  for (int j = 0; j < 12; ++j) customers.push_back("c" + std::to_string(j));
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;
  for (std::uint32_t i = 0; i < 30; ++i) {
    // item i sold to i % 13 customers
    for (std::uint32_t j = 0; j < i % 13 && j < 12; ++j) {
      entries.emplace_back(i, j);
    }
  }
  const PurchaseMatrix m = make_matrix(items, customers, std::move(entries));

  const auto sample = sample_items(store, 5, 10, m, 3);
  CHECK(sample.size() == 5);
  for (const auto& id : sample) {
    const std::uint32_t idx =
        static_cast<std::uint32_t>(std::stoul(id.substr(1)));
    CHECK(idx % 13 >= 10);
  }

  // min_sales = 0 samples uniformly; n = eligible count returns everything
  const auto all = sample_items(store, 30, 0, m, 3);
  CHECK(all.size() == 30);

  CHECK_THROWS_AS(sample_items(store, 20, 10, m, 3), data_error);

  // deterministic
  CHECK(sample_items(store, 5, 10, m, 9) == sample_items(store, 5, 10, m, 9));
}

}  // TEST_SUITE
