#include "fdna/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fdna/errors.hpp"
#include "fdna/kernels.hpp"
#include "fdna/mathutil.hpp"
#include "fdna/parallel.hpp"
#include "fdna/rng.hpp"

namespace fdna {

namespace {

constexpr double kEntropyTolerance = 1e-5;
constexpr int kBandwidthIterations = 200;

struct Prepared {
  std::size_t n = 0;
  std::vector<std::size_t> order;   // canonical -> input index
  std::vector<double> d2;           // n x n squared distances
  std::vector<std::uint64_t> hash;  // per canonical point
};

// canonical content-hash ordering makes every downstream reduction
// independent of the input order
Prepared prepare(const std::vector<std::vector<double>>& points,
                 bool cosine_input) {
  Prepared prep;
  const std::size_t n = points.size();
  prep.n = n;
  const std::size_t dim = points[0].size();
  for (const auto& p : points) {
    if (p.size() != dim) throw data_error("tsne: inconsistent dimensions");
  }

  std::vector<std::uint64_t> hash(n);
  for (std::size_t i = 0; i < n; ++i) {
    hash[i] = fnv1a64_doubles(points[i].data(), dim);
  }
  prep.order.resize(n);
  std::iota(prep.order.begin(), prep.order.end(), 0);
  std::stable_sort(prep.order.begin(), prep.order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (hash[a] != hash[b]) return hash[a] < hash[b];
                     return std::lexicographical_compare(
                         points[a].begin(), points[a].end(),
                         points[b].begin(), points[b].end());
                   });
  prep.hash.resize(n);
  for (std::size_t c = 0; c < n; ++c) prep.hash[c] = hash[prep.order[c]];

  prep.d2.assign(n * n, 0.0);
  par::for_each(n, [&](std::size_t a) {
    const auto& pa = points[prep.order[a]];
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const auto& pb = points[prep.order[b]];
      double d;
      if (cosine_input) {
        d = cosine_distance(pa, pb);
      } else {
        d = std::sqrt(squared_distance(pa.data(), pb.data(), dim));
      }
      prep.d2[a * n + b] = d * d;
    }
  });
  return prep;
}

// conditional row P_{.|i} for the given beta; returns entropy in nats
double conditional_row(const double* d2_row, std::size_t n, std::size_t i,
                       double beta, double* out) {
  double min_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) min_d2 = std::min(min_d2, d2_row[j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      out[j] = 0.0;
      continue;
    }
    out[j] = std::exp(-beta * (d2_row[j] - min_d2));
    sum += out[j];
  }
  double entropy = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    out[j] /= sum;
    if (out[j] > 0.0) entropy -= out[j] * std::log(out[j]);
  }
  return entropy;
}

// per-point bandwidth binary search; fills the conditional rows
std::vector<double> solve_conditionals(const Prepared& prep,
                                       double perplexity,
                                       std::vector<double>* out_beta) {
  const std::size_t n = prep.n;
  const double target_entropy = std::log(perplexity);
  std::vector<double> cond(n * n, 0.0);
  std::vector<double> beta(n, 1.0);
  std::vector<std::uint8_t> failed(n, 0);

  par::for_each(n, [&](std::size_t i) {
    const double* row = prep.d2.data() + i * n;
    double max_d2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) max_d2 = std::max(max_d2, row[j]);
    }
    if (max_d2 <= 0.0) {
      failed[i] = 1;  // every neighbor at distance zero
      return;
    }
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double b = 1.0;
    double* out = cond.data() + i * n;
    double entropy = 0.0;
    for (int iter = 0; iter < kBandwidthIterations; ++iter) {
      entropy = conditional_row(row, n, i, b, out);
      const double diff = entropy - target_entropy;
      if (std::abs(diff) < kEntropyTolerance) break;
      if (diff > 0.0) {
        lo = b;
        b = std::isinf(hi) ? b * 2.0 : 0.5 * (lo + hi);
      } else {
        hi = b;
        b = lo <= 0.0 ? b * 0.5 : 0.5 * (lo + hi);
      }
    }
    if (std::abs(entropy - target_entropy) >= 50.0 * kEntropyTolerance) {
      failed[i] = 2;  // entropy plateau above the target (tied distances)
      return;
    }
    beta[i] = b;
  });

  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i] == 1) {
      throw data_error(
          "tsne: degenerate input, point with all-zero distances");
    }
    if (failed[i] == 2) {
      throw numeric_error("tsne: perplexity unreachable for a point");
    }
  }
  if (out_beta) *out_beta = std::move(beta);
  return cond;
}

void validate_shape(std::size_t n, double perplexity) {
  if (n < 4) throw data_error("tsne: need at least 4 points");
  if (!(perplexity > 0.0) ||
      perplexity >= (static_cast<double>(n) - 1.0) / 3.0) {
    throw data_error("tsne: perplexity must lie in (0, (n-1)/3)");
  }
}

}  // namespace

TsneAffinities tsne_affinities(const std::vector<std::vector<double>>& points,
                               double perplexity, bool cosine_input) {
  validate_shape(points.size(), perplexity);
  const std::size_t n = points.size();
  Prepared prep = prepare(points, cosine_input);
  std::vector<double> beta;
  const std::vector<double> cond = solve_conditionals(prep, perplexity,
                                                      &beta);

  TsneAffinities result;
  result.beta.assign(n, 0.0);
  result.p.assign(n * n, 0.0);
  const double inv = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t a = 0; a < n; ++a) {
    result.beta[prep.order[a]] = beta[a];
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      result.p[prep.order[a] * n + prep.order[b]] =
          (cond[a * n + b] + cond[b * n + a]) * inv;
    }
  }
  return result;
}

MapResult tsne(const std::vector<std::vector<double>>& points,
               const TsneConfig& config) {
  validate_shape(points.size(), config.perplexity);
  if (config.iterations < 1) throw data_error("tsne: iterations < 1");
  const std::size_t n = points.size();

  Prepared prep = prepare(points, config.cosine_input);
  std::vector<double> p;
  {
    std::vector<double> cond =
        solve_conditionals(prep, config.perplexity, nullptr);
    prep.d2.clear();
    prep.d2.shrink_to_fit();
    p.assign(n * n, 0.0);
    const double inv = 1.0 / (2.0 * static_cast<double>(n));
    par::for_each(n, [&](std::size_t a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        p[a * n + b] = (cond[a * n + b] + cond[b * n + a]) * inv;
      }
    });
  }

  // init from per-point content hashes so reordering permutes the layout
  std::vector<double> y(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(config.seed, 0x75e, prep.hash[i]));
    y[2 * i] = rng.normal() * 1e-4;
    y[2 * i + 1] = rng.normal() * 1e-4;
  }

  std::vector<double> velocity(2 * n, 0.0);
  std::vector<double> gains(2 * n, 1.0);
  std::vector<double> grad(2 * n, 0.0);
  std::vector<double> y_try(2 * n);

  MapResult result;
  result.kl_history.reserve(static_cast<std::size_t>(config.iterations));
  double test_lr = config.learning_rate;

  for (int iter = 1; iter <= config.iterations; ++iter) {
    const bool exaggerated = iter <= config.early_exaggeration_iters;
    const double exaggeration =
        exaggerated ? config.early_exaggeration_factor : 1.0;

    const double z = kern::tsne_partition(y.data(), n);
    const double kl = kern::tsne_kl(p.data(), y.data(), n, z);
    if (!std::isfinite(kl)) {
      throw numeric_error(
          "tsne: KL divergence became non-finite at iteration " +
          std::to_string(iter));
    }
    result.kl_history.push_back(kl);

    kern::tsne_gradient(p.data(), y.data(), n, exaggeration, z, grad.data());

    if (config.test_mode && !exaggerated) {
      // monotone plain phase: plain gradient step, halve on KL increase
      bool moved = false;
      for (int attempt = 0; attempt < 60; ++attempt) {
        for (std::size_t t = 0; t < 2 * n; ++t) {
          y_try[t] = y[t] - test_lr * grad[t];
        }
        const double z_try = kern::tsne_partition(y_try.data(), n);
        const double kl_try =
            kern::tsne_kl(p.data(), y_try.data(), n, z_try);
        if (kl_try <= kl) {
          y.swap(y_try);
          moved = true;
          break;
        }
        test_lr *= 0.5;
      }
      if (!moved) continue;  // step underflow: layout stationary
    } else if (config.test_mode) {
      for (std::size_t t = 0; t < 2 * n; ++t) {
        y[t] -= config.learning_rate * grad[t];
      }
    } else {
      const double momentum = iter < config.momentum_switch_iter
                                  ? config.momentum_initial
                                  : config.momentum_final;
      for (std::size_t t = 0; t < 2 * n; ++t) {
        const bool same_sign = (grad[t] > 0.0) == (velocity[t] > 0.0);
        gains[t] =
            same_sign ? std::max(gains[t] * 0.8, 0.01) : gains[t] + 0.2;
        velocity[t] = momentum * velocity[t] -
                      config.learning_rate * gains[t] * grad[t];
        y[t] += velocity[t];
      }
    }

    // recenter (ascending-index mean, deterministic)
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      m0 += y[2 * i];
      m1 += y[2 * i + 1];
    }
    m0 /= static_cast<double>(n);
    m1 /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[2 * i] -= m0;
      y[2 * i + 1] -= m1;
    }
  }

  result.coordinates.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    const double y0 = y[2 * c], y1 = y[2 * c + 1];
    if (!std::isfinite(y0) || !std::isfinite(y1)) {
      throw numeric_error("tsne: non-finite coordinate");
    }
    result.coordinates[prep.order[c]] = {y0, y1};
  }
  return result;
}

std::vector<std::string> sample_items(const EmbeddingStore& store,
                                      std::size_t n, std::size_t min_sales,
                                      const PurchaseMatrix& purchases,
                                      std::uint64_t seed) {
  std::vector<std::size_t> sales(store.size(), 0);
  for (std::size_t i = 0; i < purchases.n_items(); ++i) {
    const auto it = store.index.find(purchases.item_ids[i]);
    if (it == store.index.end()) continue;
    sales[it->second] = purchases.row(i).size();
  }
  std::vector<std::string> eligible;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (sales[i] >= min_sales) eligible.push_back(store.ids[i]);
  }
  if (eligible.size() < n) {
    throw data_error("sample_items: only " + std::to_string(eligible.size()) +
                     " eligible items, need " + std::to_string(n));
  }
  Rng rng(mix_seed(seed, 0x5a9));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.uniform_int(eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(n);
  return eligible;
}

}  // namespace fdna
