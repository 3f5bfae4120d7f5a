#include <doctest.h>

#include <cmath>
#include <vector>

#include "fdna/errors.hpp"
#include "fdna/network.hpp"
#include "fdna/rng.hpp"

using namespace fdna;

namespace {

SparseVec dense_to_sparse(const std::vector<double>& x) {
  SparseVec v;
  v.size = x.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) {
      v.entries.emplace_back(static_cast<std::uint32_t>(i), x[i]);
    }
  }
  return v;
}

// straight-line matrix-multiply oracle without the layer abstraction
std::vector<double> oracle_forward(const EmbeddingModel& model,
                                   const std::vector<double>& x) {
  std::vector<double> a = x;
  for (const auto& layer : model.layers) {
    std::vector<double> z(layer.spec.out_width, 0.0);
    for (std::size_t r = 0; r < layer.spec.out_width; ++r) {
      double acc = layer.bias[r];
      for (std::size_t c = 0; c < layer.spec.in_width; ++c) {
        acc += layer.weights[r * layer.spec.in_width + c] * a[c];
      }
      z[r] = acc;
    }
    if (layer.spec.activation == Activation::relu) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    a = z;
  }
  return a;
}

EmbeddingModel random_model(const std::vector<LayerSpec>& specs,
                            std::uint64_t seed) {
  return init_model(specs, seed, ScaleRule::he);
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("all-zero weights leave only the output bias") {
  LayerSpec spec{3, 2, Activation::relu, 0.0};
  EmbeddingModel model = init_model({spec}, 1, ScaleRule::fixed, 0.0);
  model.layers[0].bias = {0.5, -0.25};
  const auto f = forward(model, std::span<const double>(
                                    std::vector<double>{1.0, 2.0, 3.0}),
                         Mode::infer, 0);
  CHECK(f[0] == 0.5);
  CHECK(f[1] == 0.0);  // ReLU of the negative bias
}

TEST_CASE("identity-weight ReLU layer clips negatives") {
  LayerSpec spec{3, 3, Activation::relu, 0.0};
  EmbeddingModel model = init_model({spec}, 1, ScaleRule::fixed, 0.0);
  for (int i = 0; i < 3; ++i) model.layers[0].weights[i * 3 + i] = 1.0;
  const std::vector<double> x = {1.0, -2.0, 3.0};
  const auto f = forward(model, std::span<const double>(x), Mode::infer, 0);
  CHECK(f == std::vector<double>{1.0, 0.0, 3.0});
}

TEST_CASE("forward matches the straight-line oracle to 1e-12") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const EmbeddingModel model = random_model(
        {{6, 5, Activation::relu, 0.0}, {5, 4, Activation::relu, 0.0}},
        1000 + trial);
    std::vector<double> x(6);
    for (double& v : x) v = rng.normal();
    const auto got = forward(model, std::span<const double>(x), Mode::infer,
                             0);
    const auto want = oracle_forward(model, x);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
    // sparse and dense paths agree exactly given the same input
    const auto sparse = forward(model, dense_to_sparse(x), Mode::infer, 0);
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(sparse[i] == doctest::Approx(got[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("width mismatch is an error") {
  const EmbeddingModel model =
      random_model({{4, 2, Activation::relu, 0.0}}, 3);
  std::vector<double> x(5, 1.0);
  CHECK_THROWS_AS(forward(model, std::span<const double>(x), Mode::infer, 0),
                  data_error);
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
  const EmbeddingModel model = random_model(
      {{4, 3, Activation::relu, 0.0}, {3, 2, Activation::relu, 0.0}}, 5);
  std::vector<double> x = {0.3, -0.2, 0.8, 0.1};
  ForwardCache cache;
  forward(model, std::span<const double>(x), Mode::train, 9, &cache);
  const Gradients grads =
      backward(model, cache, std::vector<double>{0.0, 0.0});
  for (const auto& layer : grads.weights) {
    for (double g : layer) CHECK(g == 0.0);
  }
  for (const auto& layer : grads.bias) {
    for (double g : layer) CHECK(g == 0.0);
  }
}

TEST_CASE("single linear layer gradient is the outer product") {
  LayerSpec spec{3, 1, Activation::identity, 0.0};
  EmbeddingModel model = init_model({spec}, 1, ScaleRule::fixed, 0.0);
  model.layers[0].weights = {0.5, -1.0, 2.0};
  const std::vector<double> x = {1.5, -0.5, 2.5};
  ForwardCache cache;
  forward(model, std::span<const double>(x), Mode::train, 0, &cache);
  const double upstream = 0.7;
  const Gradients grads =
      backward(model, cache, std::vector<double>{upstream});
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(grads.weights[0][c] == doctest::Approx(upstream * x[c]));
  }
  CHECK(grads.bias[0][0] == doctest::Approx(upstream));
}

TEST_CASE("backward requires a forward cache") {
  const EmbeddingModel model =
      random_model({{2, 2, Activation::relu, 0.0}}, 8);
  ForwardCache cache;  // never filled
  CHECK_THROWS_AS(backward(model, cache, std::vector<double>{1.0, 0.0}),
                  data_error);
}

TEST_CASE("analytic gradients match central finite differences") {
  // property over many random small instances, including dropout with a
  // fixed mask seed and a sparse input
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed * 13);
    EmbeddingModel model = random_model({{5, 4, Activation::relu, 0.3},
                                         {4, 3, Activation::relu, 0.0},
                                         {3, 2, Activation::identity, 0.0}},
                                        seed);
    std::vector<double> x(5);
    for (double& v : x) v = rng.normal();
    const SparseVec xs = dense_to_sparse(x);
    std::vector<double> dout(2);
    for (double& v : dout) v = rng.normal();
    const std::uint64_t mask_seed = seed * 31 + 1;

    // value plus the ReLU activation pattern: central differences are only
    // valid when the perturbation does not cross a kink
    auto probe = [&](const EmbeddingModel& m, std::string* pattern) {
      ForwardCache cache;
      const auto f = forward(m, xs, Mode::train, mask_seed, &cache);
      if (pattern) {
        pattern->clear();
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
          if (m.layers[l].spec.activation != Activation::relu) continue;
          for (double z : cache.pre[l]) pattern->push_back(z > 0.0 ? '1' : '0');
        }
      }
      double s = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) s += dout[i] * f[i];
      return s;
    };

    ForwardCache cache;
    forward(model, xs, Mode::train, mask_seed, &cache);
    const Gradients grads = backward(model, cache, dout);

    const double h = 1e-5;
    double max_rel = 0.0;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      auto check_block = [&](std::vector<double>& params,
                             const std::vector<double>& analytic) {
        for (std::size_t t = 0; t < params.size(); t += 3) {
          const double keep = params[t];
          std::string up_pattern, down_pattern;
          params[t] = keep + h;
          const double up = probe(model, &up_pattern);
          params[t] = keep - h;
          const double down = probe(model, &down_pattern);
          params[t] = keep;
          if (up_pattern != down_pattern) continue;  // kink crossed
          const double numeric = (up - down) / (2.0 * h);
          const double denom =
              std::max({std::abs(numeric), std::abs(analytic[t]), 1e-6});
          max_rel =
              std::max(max_rel, std::abs(numeric - analytic[t]) / denom);
        }
      };
      check_block(model.layers[l].weights, grads.weights[l]);
      check_block(model.layers[l].bias, grads.bias[l]);
    }
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("combined model projects with identity-block merges") {
  const std::size_t d = 3;
  EmbeddingModel a = random_model({{4, d, Activation::relu, 0.0}}, 21);
  EmbeddingModel b = random_model({{4, d, Activation::relu, 0.0}}, 22);
  CombinedModel model = make_combined(a, b, d, 23);

  std::vector<double> xa = {0.5, -0.2, 0.9, 0.3};
  std::vector<double> xb = {0.1, 0.7, -0.4, 0.2};
  const SparseVec sa = dense_to_sparse(xa);
  const SparseVec sb = dense_to_sparse(xb);
  const auto fa = forward(a, sa, Mode::infer, 0);
  const auto fb = forward(b, sb, Mode::infer, 0);

  ChannelBInput in_b;
  in_b.sparse = &sb;

  SUBCASE("merge = [I | 0] selects channel A") {
    std::fill(model.merge.weights.begin(), model.merge.weights.end(), 0.0);
    for (std::size_t r = 0; r < d; ++r) {
      model.merge.weights[r * (2 * d) + r] = 1.0;
    }
    const auto out = forward_combined(model, sa, in_b);
    for (std::size_t r = 0; r < d; ++r) {
      CHECK(out[r] == doctest::Approx(std::max(0.0, fa[r])));
    }
  }

  SUBCASE("merge = [0 | I] selects channel B") {
    std::fill(model.merge.weights.begin(), model.merge.weights.end(), 0.0);
    for (std::size_t r = 0; r < d; ++r) {
      model.merge.weights[r * (2 * d) + d + r] = 1.0;
    }
    const auto out = forward_combined(model, sa, in_b);
    for (std::size_t r = 0; r < d; ++r) {
      CHECK(out[r] == doctest::Approx(std::max(0.0, fb[r])));
    }
  }

  SUBCASE("random merge matches the concatenate-then-affine oracle") {
    const auto out = forward_combined(model, sa, in_b);
    std::vector<double> concat = fa;
    concat.insert(concat.end(), fb.begin(), fb.end());
    for (std::size_t r = 0; r < d; ++r) {
      double acc = model.merge.bias[r];
      for (std::size_t c = 0; c < 2 * d; ++c) {
        acc += model.merge.weights[r * 2 * d + c] * concat[c];
      }
      acc = std::max(0.0, acc);
      CHECK(out[r] == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("precomputed channel errors when an item is missing") {
  EmbeddingModel a = random_model({{4, 3, Activation::relu, 0.0}}, 31);
  FeatureChannel features;
  features.width = 2;
  features.ids = {"known"};
  features.data = {0.1, 0.2};
  features.index["known"] = 0;
  CombinedModel model = make_combined(a, features, 3, 33);

  std::vector<double> xa = {0.5, -0.2, 0.9, 0.3};
  const SparseVec sa = dense_to_sparse(xa);
  const std::string known = "known", missing = "missing";
  ChannelBInput in_b;
  in_b.item_id = &known;
  CHECK_NOTHROW(forward_combined(model, sa, in_b));
  in_b.item_id = &missing;
  CHECK_THROWS_WITH_AS(forward_combined(model, sa, in_b),
                       doctest::Contains("missing"), data_error);
}

TEST_CASE("combined-merge gradients match finite differences") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed * 7);
    EmbeddingModel a =
        random_model({{5, 3, Activation::relu, 0.0}}, seed + 100);
    EmbeddingModel b =
        random_model({{5, 4, Activation::relu, 0.0}}, seed + 200);
    CombinedModel model = make_combined(a, b, 3, seed + 300);
    std::vector<double> xa(5), xb(5), dout(3);
    for (double& v : xa) v = rng.normal();
    for (double& v : xb) v = rng.normal();
    for (double& v : dout) v = rng.normal();
    const SparseVec sa = dense_to_sparse(xa);
    const SparseVec sb = dense_to_sparse(xb);
    ChannelBInput in_b;
    in_b.sparse = &sb;

    auto scalar = [&]() {
      const auto f = forward_combined(model, sa, in_b);
      double s = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) s += dout[i] * f[i];
      return s;
    };

    CombinedCache cache;
    forward_combined(model, sa, in_b, &cache);
    const MergeGradients grads = backward_combined(model, cache, dout);

    const double h = 1e-5;
    for (std::size_t t = 0; t < model.merge.weights.size(); t += 2) {
      const double keep = model.merge.weights[t];
      model.merge.weights[t] = keep + h;
      const double up = scalar();
      model.merge.weights[t] = keep - h;
      const double down = scalar();
      model.merge.weights[t] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double denom =
          std::max({std::abs(numeric), std::abs(grads.weights[t]), 1e-6});
      CHECK(std::abs(numeric - grads.weights[t]) / denom < 1e-4);
    }
  }
}

TEST_CASE("initialization is deterministic with He scaling") {
  CHECK(he_sigma(100) == doctest::Approx(std::sqrt(0.02)).epsilon(1e-15));
  CHECK(he_sigma(100) == doctest::Approx(0.1414213562).epsilon(1e-9));

  const std::vector<LayerSpec> specs = {{50, 30, Activation::relu, 0.5},
                                        {30, 8, Activation::relu, 0.0}};
  const EmbeddingModel m1 = init_model(specs, 77);
  const EmbeddingModel m2 = init_model(specs, 77);
  for (std::size_t l = 0; l < specs.size(); ++l) {
    CHECK(m1.layers[l].weights == m2.layers[l].weights);
    for (double b : m1.layers[l].bias) CHECK(b == 0.0);
  }

  // empirical spread tracks the He sigma
  double sum2 = 0.0;
  for (double w : m1.layers[0].weights) sum2 += w * w;
  const double sigma = std::sqrt(sum2 / m1.layers[0].weights.size());
  CHECK(sigma == doctest::Approx(he_sigma(50)).epsilon(0.1));

  CHECK_THROWS_AS(init_model({{0, 4, Activation::relu, 0.0}}, 1), data_error);
  CHECK_THROWS_AS(
      init_model({{4, 4, Activation::relu, 0.0},
                  {5, 4, Activation::relu, 0.0}},
                 1),
      data_error);
}

TEST_CASE("inference equals the exact dropout expectation on a linear "
          "layer") {
  LayerSpec spec{3, 3, Activation::identity, 0.5};
  EmbeddingModel model = init_model({spec}, 1, ScaleRule::fixed, 0.0);
  for (int i = 0; i < 3; ++i) model.layers[0].weights[i * 3 + i] = 1.0;
  model.layers[0].bias = {0.0, 0.0, 0.0};
  const std::vector<double> x = {2.0, -4.0, 6.0};

  const auto infer = forward(model, std::span<const double>(x), Mode::infer,
                             0);
  CHECK(infer == x);  // no rescaling pass needed at inference

  // average train-mode forwards over many mask seeds: inverted dropout makes
  // the expectation equal the inference output
  std::vector<double> mean(3, 0.0);
  const int trials = 40000;
  for (int t = 0; t < trials; ++t) {
    const auto f = forward(model, std::span<const double>(x), Mode::train,
                           static_cast<std::uint64_t>(t));
    for (int i = 0; i < 3; ++i) mean[i] += f[i];
  }
  for (int i = 0; i < 3; ++i) {
    mean[i] /= trials;
    // binomial s.e. of the mean at keep=0.5 is |x| / sqrt(trials)
    CHECK(std::abs(mean[i] - infer[i]) <
          5.0 * std::abs(x[i]) / std::sqrt(static_cast<double>(trials)));
  }

  // infer mode is deterministic
  const auto again = forward(model, std::span<const double>(x), Mode::infer,
                             123);
  CHECK(again == infer);
}

TEST_CASE("ReLU output stays non-negative") {
  Rng rng(15);
  const EmbeddingModel model = random_model(
      {{8, 6, Activation::relu, 0.2}, {6, 4, Activation::relu, 0.0}}, 91);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(8);
    for (double& v : x) v = rng.normal() * 3.0;
    for (const Mode mode : {Mode::train, Mode::infer}) {
      const auto f = forward(model, std::span<const double>(x), mode,
                             static_cast<std::uint64_t>(trial));
      for (double v : f) CHECK(v >= 0.0);
    }
  }
}

}  // TEST_SUITE
