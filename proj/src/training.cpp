#include "fdna/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fdna/errors.hpp"
#include "fdna/kernels.hpp"
#include "fdna/mathutil.hpp"
#include "fdna/parallel.hpp"
#include "fdna/rng.hpp"

namespace fdna {

double predict_probability(std::span<const double> f,
                           std::span<const double> w, double b) {
  if (f.size() != w.size()) {
    throw data_error("predict_probability: dimension mismatch");
  }
  double p = sigmoid(dot(f.data(), w.data(), f.size()) + b);
  p = std::max(p, std::numeric_limits<double>::min());
  p = std::min(p, 1.0 - std::numeric_limits<double>::epsilon() / 2.0);
  return p;
}

double pair_loss(double p, bool bought, ClampStats* stats) {
  if (p < kProbClamp) {
    p = kProbClamp;
    if (stats) ++stats->low;
  } else if (p > 1.0 - kProbClamp) {
    p = 1.0 - kProbClamp;
    if (stats) ++stats->high;
  }
  return bought ? -std::log(p) : -std::log1p(-p);
}

double cross_entropy(std::span<const double> p,
                     std::span<const std::uint8_t> labels,
                     ClampStats* stats) {
  if (p.size() != labels.size()) {
    throw data_error("cross_entropy: length mismatch");
  }
  if (p.empty()) throw data_error("cross_entropy: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sum += pair_loss(p[i], labels[i] != 0, stats);
  }
  return sum / static_cast<double>(p.size());
}

CustomerBank init_customer_bank(const PurchaseMatrix& matrix,
                                const QuadrantSplit& split, std::size_t dim,
                                std::uint64_t seed, double sigma) {
  const auto& customers = split.customer_train;
  const std::size_t n_train_items = split.item_train.size();
  if (n_train_items == 0) {
    throw data_error("init_customer_bank: no training items");
  }

  std::vector<std::size_t> counts(matrix.n_customers(), 0);
  for (std::uint32_t i : split.item_train) {
    for (std::uint32_t j : matrix.row(i)) ++counts[j];
  }

  CustomerBank bank;
  bank.dim = dim;
  bank.weights.resize(customers.size() * dim);
  bank.biases.resize(customers.size());
  bank.customer_ids.reserve(customers.size());

  const double eps = 1.0 / (2.0 * static_cast<double>(n_train_items));
  for (std::size_t row = 0; row < customers.size(); ++row) {
    const std::uint32_t j = customers[row];
    bank.customer_ids.push_back(matrix.customer_ids[j]);
    Rng rng(mix_seed(seed, 0xcb41, j));
    for (std::size_t t = 0; t < dim; ++t) {
      bank.weights[row * dim + t] = rng.normal() * sigma;
    }
    double rate = static_cast<double>(counts[j]) /
                  static_cast<double>(n_train_items);
    rate = std::min(std::max(rate, eps), 1.0 - eps);
    bank.biases[row] = logit(rate);
  }
  return bank;
}

// --- embedders -------------------------------------------------------------

MlpEmbedder::MlpEmbedder(EmbeddingModel& model,
                         const std::vector<SparseVec>& encodings)
    : model_(model), encodings_(encodings), velocity_(make_gradients(model)) {}

std::size_t MlpEmbedder::dim() const { return model_.output_dim(); }

void MlpEmbedder::begin_batch(std::size_t slots) {
  caches_.resize(slots);
  chunks_ = par::chunk_count(slots);
  if (chunk_grads_.size() != chunks_) {
    chunk_grads_.assign(chunks_, make_gradients(model_));
  } else {
    for (auto& g : chunk_grads_) zero_gradients(g);
  }
}

void MlpEmbedder::forward_slot(std::size_t slot, std::uint32_t item,
                               Mode mode, std::uint64_t dropout_seed,
                               double* out) {
  const SparseVec& enc = encodings_.at(item);
  ForwardCache* cache = mode == Mode::train ? &caches_.at(slot) : nullptr;
  const auto f = forward(model_, enc, mode, dropout_seed, cache);
  std::copy(f.begin(), f.end(), out);
}

void MlpEmbedder::backward_slot(std::size_t slot, std::size_t chunk,
                                std::span<const double> dout) {
  backward_accumulate(model_, caches_.at(slot), dout, chunk_grads_.at(chunk));
}

void MlpEmbedder::step(double lr, double momentum) {
  // combine chunk gradients in ascending chunk order, then momentum update
  for (std::size_t l = 0; l < model_.layers.size(); ++l) {
    auto& layer = model_.layers[l];
    auto& vw = velocity_.weights[l];
    auto& vb = velocity_.bias[l];
    for (std::size_t t = 0; t < layer.weights.size(); ++t) {
      double g = 0.0;
      for (std::size_t c = 0; c < chunks_; ++c) {
        g += chunk_grads_[c].weights[l][t];
      }
      vw[t] = momentum * vw[t] - lr * g;
      layer.weights[t] += vw[t];
    }
    for (std::size_t t = 0; t < layer.bias.size(); ++t) {
      double g = 0.0;
      for (std::size_t c = 0; c < chunks_; ++c) {
        g += chunk_grads_[c].bias[l][t];
      }
      vb[t] = momentum * vb[t] - lr * g;
      layer.bias[t] += vb[t];
    }
  }
}

bool MlpEmbedder::finite() const {
  for (const auto& layer : model_.layers) {
    for (double v : layer.weights) {
      if (!std::isfinite(v)) return false;
    }
    for (double v : layer.bias) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

PrecomputedEmbedder::PrecomputedEmbedder(
    const FeatureChannel& features, const std::vector<std::string>& item_ids)
    : features_(features), item_ids_(item_ids) {}

std::size_t PrecomputedEmbedder::dim() const { return features_.width; }

void PrecomputedEmbedder::forward_slot(std::size_t, std::uint32_t item, Mode,
                                       std::uint64_t, double* out) {
  const auto f = features_.get(item_ids_.at(item));
  std::copy(f.begin(), f.end(), out);
}

CombinedEmbedder::CombinedEmbedder(CombinedModel& model,
                                   const std::vector<SparseVec>& encodings_a,
                                   const std::vector<std::string>& item_ids,
                                   const std::vector<SparseVec>* encodings_b)
    : model_(model),
      encodings_a_(encodings_a),
      item_ids_(item_ids),
      encodings_b_(encodings_b) {
  velocity_.weights.assign(model.merge.weights.size(), 0.0);
  velocity_.bias.assign(model.merge.bias.size(), 0.0);
  if (std::holds_alternative<EmbeddingModel>(model.channel_b) &&
      encodings_b == nullptr) {
    throw data_error("combined embedder: channel B encodings required");
  }
}

std::size_t CombinedEmbedder::dim() const { return model_.output_dim(); }

void CombinedEmbedder::begin_batch(std::size_t slots) {
  caches_.resize(slots);
  chunks_ = par::chunk_count(slots);
  MergeGradients zero;
  zero.weights.assign(model_.merge.weights.size(), 0.0);
  zero.bias.assign(model_.merge.bias.size(), 0.0);
  chunk_grads_.assign(chunks_, zero);
}

void CombinedEmbedder::forward_slot(std::size_t slot, std::uint32_t item,
                                    Mode mode, std::uint64_t, double* out) {
  ChannelBInput input_b;
  const std::string* id = &item_ids_.at(item);
  const SparseVec* enc_b = nullptr;
  if (std::holds_alternative<EmbeddingModel>(model_.channel_b)) {
    enc_b = &encodings_b_->at(item);
    input_b.sparse = enc_b;
  } else {
    input_b.item_id = id;
  }
  CombinedCache* cache = mode == Mode::train ? &caches_.at(slot) : nullptr;
  const auto f =
      forward_combined(model_, encodings_a_.at(item), input_b, cache);
  std::copy(f.begin(), f.end(), out);
}

void CombinedEmbedder::backward_slot(std::size_t slot, std::size_t chunk,
                                     std::span<const double> dout) {
  backward_combined_accumulate(model_, caches_.at(slot), dout,
                               chunk_grads_.at(chunk));
}

void CombinedEmbedder::step(double lr, double momentum) {
  auto& merge = model_.merge;
  for (std::size_t t = 0; t < merge.weights.size(); ++t) {
    double g = 0.0;
    for (std::size_t c = 0; c < chunks_; ++c) {
      g += chunk_grads_[c].weights[t];
    }
    velocity_.weights[t] = momentum * velocity_.weights[t] - lr * g;
    merge.weights[t] += velocity_.weights[t];
  }
  for (std::size_t t = 0; t < merge.bias.size(); ++t) {
    double g = 0.0;
    for (std::size_t c = 0; c < chunks_; ++c) g += chunk_grads_[c].bias[t];
    velocity_.bias[t] = momentum * velocity_.bias[t] - lr * g;
    merge.bias[t] += velocity_.bias[t];
  }
}

bool CombinedEmbedder::finite() const {
  for (double v : model_.merge.weights) {
    if (!std::isfinite(v)) return false;
  }
  for (double v : model_.merge.bias) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// --- training --------------------------------------------------------------

namespace {

// matrix customer index -> row of the bank over the given customer set
std::vector<std::int32_t> bank_row_map(std::size_t n_customers,
                                       std::span<const std::uint32_t> set) {
  std::vector<std::int32_t> map(n_customers, -1);
  for (std::size_t row = 0; row < set.size(); ++row) {
    map[set[row]] = static_cast<std::int32_t>(row);
  }
  return map;
}

}  // namespace

double exact_quadrant_loss(ItemEmbedder& embedder,
                           const PurchaseMatrix& matrix,
                           const QuadrantSplit& split, Quadrant which,
                           const CustomerBank& bank, ClampStats* stats) {
  const QuadrantView view = quadrant(matrix, split, which);
  const auto items = view.items();
  const auto customers = view.customers();
  if (items.empty() || customers.empty()) {
    throw data_error("exact_quadrant_loss: empty quadrant");
  }
  if (bank.size() != customers.size()) {
    throw data_error("exact_quadrant_loss: bank does not match quadrant");
  }
  const std::size_t d = embedder.dim();
  const auto row_of = bank_row_map(matrix.n_customers(), customers);

  const std::size_t nc = par::chunk_count(items.size());
  std::vector<double> partial(nc, 0.0);
  std::vector<ClampStats> partial_stats(nc);
  par::for_chunks(items.size(), [&](std::size_t c, std::size_t b,
                                    std::size_t e) {
    std::vector<double> f(d);
    std::vector<std::uint8_t> y(customers.size());
    double acc = 0.0;
    for (std::size_t idx = b; idx < e; ++idx) {
      const std::uint32_t item = items[idx];
      embedder.forward_slot(0, item, Mode::infer, 0, f.data());
      std::fill(y.begin(), y.end(), 0);
      for (std::uint32_t j : matrix.row(item)) {
        const std::int32_t r = row_of[j];
        if (r >= 0) y[static_cast<std::size_t>(r)] = 1;
      }
      for (std::size_t r = 0; r < customers.size(); ++r) {
        const double p = predict_probability(
            {f.data(), d}, bank.w(r), bank.biases[r]);
        acc += pair_loss(p, y[r] != 0, &partial_stats[c]);
      }
    }
    partial[c] = acc;
  });

  double total = 0.0;
  for (double v : partial) total += v;
  if (stats) {
    for (const auto& s : partial_stats) {
      stats->low += s.low;
      stats->high += s.high;
    }
  }
  return total / (static_cast<double>(items.size()) *
                  static_cast<double>(customers.size()));
}

TrainResult train(ItemEmbedder& embedder, const PurchaseMatrix& matrix,
                  const QuadrantSplit& split, const TrainConfig& config) {
  if (config.learning_rate <= 0.0) {
    throw data_error("train: learning rate must be positive");
  }
  if (config.momentum < 0.0 || config.momentum >= 1.0) {
    throw data_error("train: momentum must lie in [0,1)");
  }
  if (config.epochs < 0) throw data_error("train: negative epoch count");
  if (config.item_batch_size == 0) {
    throw data_error("train: item batch size must be positive");
  }
  if (config.negative_subsample && *config.negative_subsample == 0) {
    throw data_error("train: negative_subsample must be positive when set");
  }

  const auto& items = split.item_train;
  const auto& customers = split.customer_train;
  if (items.empty() || customers.empty()) {
    throw data_error("train: empty training quadrant");
  }
  const std::size_t d = embedder.dim();
  const std::size_t n_cust = customers.size();

  TrainResult result;
  result.bank = init_customer_bank(matrix, split, d,
                                   mix_seed(config.seed, 0xba9c),
                                   config.weight_init_sigma);
  CustomerBank& bank = result.bank;
  const auto row_of = bank_row_map(matrix.n_customers(), customers);

  std::vector<double> vel_w(n_cust * d, 0.0);
  std::vector<double> vel_b(n_cust, 0.0);

  result.loss_history.push_back(exact_quadrant_loss(
      embedder, matrix, split, Quadrant::tt, bank, &result.clamps));

  std::vector<std::uint32_t> order(items.begin(), items.end());
  const std::size_t batch_size = config.item_batch_size;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(config.seed, 0xe90c, epoch));
    for (std::size_t i = order.size(); i-- > 1;) {
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
    }

    double epoch_sum = 0.0;
    double epoch_pairs = 0.0;
    std::size_t batch_index = 0;

    for (std::size_t start = 0; start < order.size();
         start += batch_size, ++batch_index) {
      const std::size_t b_count =
          std::min(batch_size, order.size() - start);
      const std::uint32_t* batch = order.data() + start;
      const double scale =
          1.0 / (static_cast<double>(b_count) * static_cast<double>(n_cust));

      embedder.begin_batch(b_count);
      std::vector<double> fdna(b_count * d);
      par::for_each(b_count, [&](std::size_t slot) {
        embedder.forward_slot(
            slot, batch[slot], Mode::train,
            mix_seed(config.seed, 0xd309, epoch, batch_index, batch[slot]),
            fdna.data() + slot * d);
      });

      double batch_sum = 0.0;
      std::vector<double> dfdna(b_count * d, 0.0);

      if (!config.negative_subsample) {
        // exact pass over every training customer
        std::vector<double> prob(b_count * n_cust);
        std::vector<std::uint8_t> labels(b_count * n_cust, 0);
        par::for_each(b_count, [&](std::size_t slot) {
          for (std::uint32_t j : matrix.row(batch[slot])) {
            const std::int32_t r = row_of[j];
            if (r >= 0) labels[slot * n_cust + static_cast<std::size_t>(r)] = 1;
          }
        });
        kern::score_pairs(fdna.data(), b_count, d, bank.weights.data(),
                          bank.biases.data(), n_cust, prob.data());

        const std::size_t nc = par::chunk_count(b_count);
        std::vector<double> partial(nc, 0.0);
        std::vector<ClampStats> partial_stats(nc);
        par::for_chunks(b_count, [&](std::size_t c, std::size_t lo,
                                     std::size_t hi) {
          double acc = 0.0;
          for (std::size_t slot = lo; slot < hi; ++slot) {
            for (std::size_t r = 0; r < n_cust; ++r) {
              acc += pair_loss(prob[slot * n_cust + r],
                               labels[slot * n_cust + r] != 0,
                               &partial_stats[c]);
            }
          }
          partial[c] = acc;
        });
        for (double v : partial) batch_sum += v;
        for (const auto& s : partial_stats) {
          result.clamps.low += s.low;
          result.clamps.high += s.high;
        }

        // item-side gradient uses the pre-update bank
        par::for_each(b_count, [&](std::size_t slot) {
          double* df = dfdna.data() + slot * d;
          for (std::size_t r = 0; r < n_cust; ++r) {
            const double g =
                (prob[slot * n_cust + r] -
                 static_cast<double>(labels[slot * n_cust + r])) *
                scale;
            const double* w = bank.weights.data() + r * d;
            for (std::size_t t = 0; t < d; ++t) df[t] += g * w[t];
          }
        });

        kern::customer_step(fdna.data(), b_count, d, prob.data(),
                            labels.data(), scale, config.learning_rate,
                            config.momentum, config.customer_l2,
                            bank.weights.data(), bank.biases.data(),
                            vel_w.data(), vel_b.data(), n_cust);
      } else {
        // sampled negatives, reweighted to keep the estimator unbiased
        const std::size_t m = *config.negative_subsample;
        std::vector<double> grad_w(n_cust * d, 0.0);
        std::vector<double> grad_b(n_cust, 0.0);
        const std::size_t nc = par::chunk_count(b_count);
        std::vector<double> partial(nc, 0.0);
        std::vector<ClampStats> partial_stats(nc);

        // serial over slots when touching shared customer gradients;
        // the heavy per-slot work (sampling, scoring) parallelizes by chunk
        struct Touch {
          std::uint32_t row;
          double g;
        };
        std::vector<std::vector<Touch>> touches(b_count);
        par::for_chunks(b_count, [&](std::size_t c, std::size_t lo,
                                     std::size_t hi) {
          double acc = 0.0;
          for (std::size_t slot = lo; slot < hi; ++slot) {
            const std::uint32_t item = batch[slot];
            const double* f = fdna.data() + slot * d;
            auto& touched = touches[slot];
            std::size_t n_pos = 0;
            for (std::uint32_t j : matrix.row(item)) {
              const std::int32_t r = row_of[j];
              if (r < 0) continue;
              ++n_pos;
              const double p = predict_probability(
                  {f, d}, bank.w(static_cast<std::size_t>(r)),
                  bank.biases[static_cast<std::size_t>(r)]);
              acc += pair_loss(p, true, &partial_stats[c]);
              touched.push_back(
                  {static_cast<std::uint32_t>(r), (p - 1.0) * scale});
            }
            const double neg_weight =
                static_cast<double>(n_cust - n_pos) / static_cast<double>(m);
            Rng rng(mix_seed(config.seed, 0x9e90, epoch, batch_index, item));
            for (std::size_t s = 0; s < m; ++s) {
              std::uint32_t r;
              do {
                r = static_cast<std::uint32_t>(rng.uniform_int(n_cust));
              } while (matrix.has(item, customers[r]));
              const double p = predict_probability(
                  {f, d}, bank.w(r), bank.biases[r]);
              acc += neg_weight * pair_loss(p, false, &partial_stats[c]);
              touched.push_back({r, p * neg_weight * scale});
            }
          }
          partial[c] = acc;
        });
        for (double v : partial) batch_sum += v;
        for (const auto& s : partial_stats) {
          result.clamps.low += s.low;
          result.clamps.high += s.high;
        }

        for (std::size_t slot = 0; slot < b_count; ++slot) {
          const double* f = fdna.data() + slot * d;
          double* df = dfdna.data() + slot * d;
          for (const auto& [r, g] : touches[slot]) {
            const double* w = bank.weights.data() + r * d;
            for (std::size_t t = 0; t < d; ++t) {
              df[t] += g * w[t];
              grad_w[r * d + t] += g * f[t];
            }
            grad_b[r] += g;
          }
        }
        par::for_each(n_cust, [&](std::size_t r) {
          double* w = bank.weights.data() + r * d;
          double* vw = vel_w.data() + r * d;
          for (std::size_t t = 0; t < d; ++t) {
            vw[t] = config.momentum * vw[t] -
                    config.learning_rate *
                        (grad_w[r * d + t] + config.customer_l2 * w[t]);
            w[t] += vw[t];
          }
          vel_b[r] =
              config.momentum * vel_b[r] - config.learning_rate * grad_b[r];
          bank.biases[r] += vel_b[r];
        });
      }

      if (!std::isfinite(batch_sum)) {
        throw numeric_error(
            "train: loss diverged at epoch " + std::to_string(epoch) +
            " (learning rate " + std::to_string(config.learning_rate) + ")");
      }

      if (embedder.trainable()) {
        par::for_chunks(b_count, [&](std::size_t chunk, std::size_t lo,
                                     std::size_t hi) {
          for (std::size_t slot = lo; slot < hi; ++slot) {
            embedder.backward_slot(slot, chunk,
                                   {dfdna.data() + slot * d, d});
          }
        });
        embedder.step(config.learning_rate, config.momentum);
      }

      epoch_sum += batch_sum;
      epoch_pairs +=
          static_cast<double>(b_count) * static_cast<double>(n_cust);
    }

    const double mean = epoch_sum / epoch_pairs;
    bool params_finite = embedder.finite();
    for (std::size_t t = 0; params_finite && t < bank.biases.size(); ++t) {
      params_finite = std::isfinite(bank.biases[t]);
    }
    for (std::size_t t = 0; params_finite && t < bank.weights.size(); ++t) {
      params_finite = std::isfinite(bank.weights[t]);
    }
    if (!std::isfinite(mean) || !params_finite) {
      throw numeric_error(
          "train: loss diverged at epoch " + std::to_string(epoch) +
          " (learning rate " + std::to_string(config.learning_rate) + ")");
    }
    result.loss_history.push_back(mean);
  }

  // fDNA sparsity over training items, reported not asserted
  {
    std::vector<double> f(d);
    std::size_t zeros = 0;
    for (std::uint32_t item : items) {
      embedder.forward_slot(0, item, Mode::infer, 0, f.data());
      for (double v : f) {
        if (v == 0.0) ++zeros;
      }
    }
    result.fdna_zero_fraction =
        static_cast<double>(zeros) /
        (static_cast<double>(items.size()) * static_cast<double>(d));
  }
  return result;
}

namespace {

// Cholesky solve of a small symmetric positive-definite system; returns
// false when the factorization breaks down.
bool cholesky_solve(std::vector<double>& a, std::vector<double>& x,
                    std::size_t n) {
  for (std::size_t c = 0; c < n; ++c) {
    double diag = a[c * n + c];
    for (std::size_t k = 0; k < c; ++k) diag -= a[c * n + k] * a[c * n + k];
    if (!(diag > 0.0)) return false;
    const double root = std::sqrt(diag);
    a[c * n + c] = root;
    for (std::size_t r = c + 1; r < n; ++r) {
      double v = a[r * n + c];
      for (std::size_t k = 0; k < c; ++k) v -= a[r * n + k] * a[c * n + k];
      a[r * n + c] = v / root;
    }
  }
  for (std::size_t r = 0; r < n; ++r) {  // forward
    double v = x[r];
    for (std::size_t k = 0; k < r; ++k) v -= a[r * n + k] * x[k];
    x[r] = v / a[r * n + r];
  }
  for (std::size_t r = n; r-- > 0;) {  // backward
    double v = x[r];
    for (std::size_t k = r + 1; k < n; ++k) v -= a[k * n + r] * x[k];
    x[r] = v / a[r * n + r];
  }
  return true;
}

}  // namespace

FitResult fit_customers(const std::vector<double>& fdna_rows, std::size_t dim,
                        const std::vector<std::uint32_t>& item_train,
                        const PurchaseMatrix& matrix,
                        const std::vector<std::uint32_t>& customers,
                        const FitConfig& config) {
  const std::size_t n = item_train.size();
  if (n == 0) throw data_error("fit_customers: no training items");
  if (fdna_rows.size() != n * dim) {
    throw data_error("fit_customers: fDNA row block has wrong shape");
  }

  // per-customer positive positions within item_train
  std::vector<std::int64_t> pos_of(matrix.n_customers(), -1);
  for (std::size_t r = 0; r < customers.size(); ++r) {
    pos_of[customers[r]] = static_cast<std::int64_t>(r);
  }
  std::vector<std::vector<std::uint32_t>> positives(customers.size());
  for (std::size_t row = 0; row < n; ++row) {
    for (std::uint32_t j : matrix.row(item_train[row])) {
      const std::int64_t r = pos_of[j];
      if (r >= 0) {
        positives[static_cast<std::size_t>(r)].push_back(
            static_cast<std::uint32_t>(row));
      }
    }
  }

  FitResult result;
  result.bank.dim = dim;
  result.bank.weights.assign(customers.size() * dim, 0.0);
  result.bank.biases.assign(customers.size(), 0.0);
  result.bank.customer_ids.reserve(customers.size());
  for (std::uint32_t j : customers) {
    result.bank.customer_ids.push_back(matrix.customer_ids[j]);
  }
  result.converged.assign(customers.size(), 0);
  result.iterations.assign(customers.size(), 0);

  const double n_d = static_cast<double>(n);
  const double eps = 1.0 / (2.0 * n_d);
  const double b_lo = logit(eps);
  const double b_hi = -b_lo;
  const double lambda = config.l2_lambda;

  par::for_each(customers.size(), [&](std::size_t r) {
    std::vector<std::uint8_t> y(n, 0);
    for (std::uint32_t row : positives[r]) y[row] = 1;

    double rate = static_cast<double>(positives[r].size()) / n_d;
    rate = std::min(std::max(rate, eps), 1.0 - eps);
    const double b = logit(rate);

    // single-class customers carry no signal beyond the base rate: the
    // clamped-rate initialization is the answer (w = 0, b = logit(rate))
    if (positives[r].empty() || positives[r].size() == n) {
      result.bank.biases[r] = b;
      result.converged[r] = 1;
      return;
    }

    // damped Newton over theta = [w; b]; the bias row of the Hessian
    // carries no L2 term, the bias itself is box-constrained
    const std::size_t aug = dim + 1;
    std::vector<double> theta(aug, 0.0);
    theta[dim] = b;
    std::vector<double> grad(aug), hessian(aug * aug), system(aug * aug),
        delta(aug), theta_try(aug);

    auto evaluate = [&](const std::vector<double>& tv, bool with_curvature) {
      double loss = 0.0;
      if (with_curvature) {
        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(hessian.begin(), hessian.end(), 0.0);
      }
      for (std::size_t row = 0; row < n; ++row) {
        const double* f = fdna_rows.data() + row * dim;
        const double z = dot(f, tv.data(), dim) + tv[dim];
        const double p = sigmoid(z);
        loss += pair_loss(p, y[row] != 0, nullptr);
        if (!with_curvature) continue;
        const double g = p - static_cast<double>(y[row]);
        const double s = std::max(p * (1.0 - p), 1e-12);
        for (std::size_t a = 0; a < dim; ++a) {
          grad[a] += g * f[a];
          const double sf = s * f[a];
          for (std::size_t c = 0; c <= a; ++c) {
            hessian[a * aug + c] += sf * f[c];
          }
          hessian[dim * aug + a] += sf;
        }
        grad[dim] += g;
        hessian[dim * aug + dim] += s;
      }
      loss /= n_d;
      double reg = 0.0;
      for (std::size_t t = 0; t < dim; ++t) reg += tv[t] * tv[t];
      loss += 0.5 * lambda * reg;
      if (with_curvature) {
        for (std::size_t t = 0; t < aug; ++t) grad[t] /= n_d;
        for (double& h : hessian) h /= n_d;
        for (std::size_t t = 0; t < dim; ++t) {
          grad[t] += lambda * tv[t];
          hessian[t * aug + t] += lambda;
        }
        // mirror the lower triangle
        for (std::size_t a = 0; a < aug; ++a) {
          for (std::size_t c = a + 1; c < aug; ++c) {
            hessian[a * aug + c] = hessian[c * aug + a];
          }
        }
      }
      return loss;
    };

    double loss = evaluate(theta, true);
    int iter = 0;
    bool converged = false;
    double damping = 0.0;

    for (; iter < config.max_iterations; ++iter) {
      double gnorm = 0.0;
      for (std::size_t t = 0; t < dim; ++t) {
        gnorm = std::max(gnorm, std::abs(grad[t]));
      }
      double gb_proj = grad[dim];
      if ((theta[dim] <= b_lo && gb_proj > 0.0) ||
          (theta[dim] >= b_hi && gb_proj < 0.0)) {
        gb_proj = 0.0;
      }
      gnorm = std::max(gnorm, std::abs(gb_proj));
      if (gnorm < config.tolerance) {
        converged = true;
        break;
      }

      bool moved = false;
      for (int attempt = 0; attempt < 40 && !moved; ++attempt) {
        system = hessian;
        if (damping > 0.0) {
          for (std::size_t t = 0; t < aug; ++t) {
            system[t * aug + t] += damping;
          }
        }
        delta = grad;
        if (!cholesky_solve(system, delta, aug)) {
          damping = damping == 0.0 ? 1e-8 : damping * 10.0;
          continue;
        }
        double descent = 0.0;  // grad . delta (delta is the Newton step)
        for (std::size_t t = 0; t < aug; ++t) descent += grad[t] * delta[t];
        double step = 1.0;
        bool accepted = false;
        for (int half = 0; half < 40; ++half) {
          for (std::size_t t = 0; t < aug; ++t) {
            theta_try[t] = theta[t] - step * delta[t];
          }
          theta_try[dim] = std::min(std::max(theta_try[dim], b_lo), b_hi);
          const double loss_try = evaluate(theta_try, false);
          if (loss_try <= loss - 1e-4 * step * descent) {
            theta.swap(theta_try);
            loss = evaluate(theta, true);
            accepted = true;
            break;
          }
          step *= 0.5;
        }
        if (accepted) {
          damping = damping * 0.25;
          if (damping < 1e-12) damping = 0.0;
          moved = true;
        } else {
          damping = damping == 0.0 ? 1e-8 : damping * 10.0;
        }
      }
      if (!moved) break;  // no usable descent step left
    }

    std::copy(theta.begin(), theta.begin() + static_cast<long>(dim),
              result.bank.weights.begin() + r * dim);
    result.bank.biases[r] = theta[dim];
    result.converged[r] = converged ? 1 : 0;
    result.iterations[r] = iter;
  });

  return result;
}

}  // namespace fdna
