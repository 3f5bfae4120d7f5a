#include "fdna/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "fdna/errors.hpp"
#include "fdna/mathutil.hpp"
#include "fdna/parallel.hpp"
#include "fdna/rng.hpp"

namespace fdna {

CalibrationReport calibrate(std::span<const double> predicted,
                            std::span<const std::uint8_t> bought,
                            std::size_t bin_count) {
  if (predicted.size() != bought.size()) {
    throw data_error("calibrate: length mismatch");
  }
  if (predicted.empty()) throw data_error("calibrate: empty input");
  if (bin_count == 0 || bin_count > predicted.size()) {
    throw data_error("calibrate: bin count must lie in [1, pair count]");
  }
  for (double p : predicted) {
    if (!(p > 0.0 && p < 1.0)) {
      throw data_error("calibrate: probabilities must lie in (0,1)");
    }
  }

  const std::size_t n = predicted.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return predicted[a] < predicted[b];
                   });

  CalibrationReport report;
  report.sample_size = n;
  report.bin_count = bin_count;
  report.bins.resize(bin_count);
  for (std::size_t b = 0; b < bin_count; ++b) {
    const std::size_t lo = b * n / bin_count;
    const std::size_t hi = (b + 1) * n / bin_count;
    auto& bin = report.bins[b];
    bin.count = hi - lo;
    double sum_p = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      sum_p += predicted[order[i]];
      pos += bought[order[i]] != 0 ? 1 : 0;
    }
    bin.positives = pos;
    bin.mean_predicted = sum_p / static_cast<double>(bin.count);
    bin.empirical_rate =
        static_cast<double>(pos) / static_cast<double>(bin.count);
  }
  return report;
}

namespace {

// average ranks (1-based) with ties shared; returns positive/negative counts
double mann_whitney_auc(std::span<const double> scores,
                        std::span<const std::uint8_t> labels,
                        std::size_t* out_pos, std::size_t* out_neg) {
  const std::size_t n = scores.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return scores[a] < scores[b];
                   });
  std::size_t n_pos = 0;
  for (std::uint8_t y : labels) n_pos += y != 0 ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (out_pos) *out_pos = n_pos;
  if (out_neg) *out_neg = n_neg;
  if (n_pos == 0 || n_neg == 0) {
    throw numeric_error("auc: both classes required");
  }

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1 .. j share the average rank
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] != 0) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                                      static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

double auc_score(std::span<const double> scores,
                 std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw data_error("auc: length mismatch");
  }
  if (scores.empty()) throw data_error("auc: empty input");
  return mann_whitney_auc(scores, labels, nullptr, nullptr);
}

RocCurve roc_auc(std::span<const double> scores,
                 std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw data_error("roc_auc: length mismatch");
  }
  if (scores.empty()) throw data_error("roc_auc: empty input");

  RocCurve curve;
  std::size_t n_pos = 0, n_neg = 0;
  curve.auc = mann_whitney_auc(scores, labels, &n_pos, &n_neg);

  const std::size_t n = scores.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return scores[a] > scores[b];
                   });

  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] != 0) {
        ++tp;
      } else {
        ++fp;
      }
    }
    curve.points.push_back(
        {static_cast<double>(fp) / static_cast<double>(n_neg),
         static_cast<double>(tp) / static_cast<double>(n_pos)});
    i = j;
  }
  return curve;
}

void ScoringContext::finalize() {
  train_row.assign(matrix->n_customers(), -1);
  val_row.assign(matrix->n_customers(), -1);
  for (std::size_t r = 0; r < split->customer_train.size(); ++r) {
    train_row[split->customer_train[r]] = static_cast<std::int32_t>(r);
  }
  for (std::size_t r = 0; r < split->customer_val.size(); ++r) {
    val_row[split->customer_val[r]] = static_cast<std::int32_t>(r);
  }
}

double ScoringContext::score(std::uint32_t item,
                             std::uint32_t customer) const {
  if (!has_fdna[item]) {
    throw data_error("scoring: no fDNA for item " + matrix->item_ids[item]);
  }
  const CustomerBank* bank = nullptr;
  std::int32_t row = -1;
  if (split->customer_is_val[customer]) {
    bank = bank_val;
    row = val_row[customer];
  } else {
    bank = bank_train;
    row = train_row[customer];
  }
  if (bank == nullptr || row < 0) {
    throw data_error("scoring: missing customer bank for customer " +
                     matrix->customer_ids[customer]);
  }
  return predict_probability(
      {fdna.data() + static_cast<std::size_t>(item) * dim, dim},
      bank->w(static_cast<std::size_t>(row)),
      bank->biases[static_cast<std::size_t>(row)]);
}

ScoringContext make_scoring_context(const PurchaseMatrix& matrix,
                                    const QuadrantSplit& split,
                                    ItemEmbedder& embedder,
                                    const CustomerBank* bank_train,
                                    const CustomerBank* bank_val) {
  ScoringContext ctx;
  ctx.matrix = &matrix;
  ctx.split = &split;
  ctx.dim = embedder.dim();
  ctx.fdna.assign(matrix.n_items() * ctx.dim, 0.0);
  ctx.has_fdna.assign(matrix.n_items(), 1);
  ctx.bank_train = bank_train;
  ctx.bank_val = bank_val;
  par::for_each(matrix.n_items(), [&](std::size_t i) {
    embedder.forward_slot(0, static_cast<std::uint32_t>(i), Mode::infer, 0,
                          ctx.fdna.data() + i * ctx.dim);
  });
  ctx.finalize();
  return ctx;
}

ScoringContext make_scoring_context_from_store(
    const PurchaseMatrix& matrix, const QuadrantSplit& split,
    const EmbeddingStore& store, const CustomerBank* bank_train,
    const CustomerBank* bank_val) {
  ScoringContext ctx;
  ctx.matrix = &matrix;
  ctx.split = &split;
  ctx.dim = store.dim;
  ctx.fdna.assign(matrix.n_items() * store.dim, 0.0);
  ctx.has_fdna.assign(matrix.n_items(), 0);
  ctx.bank_train = bank_train;
  ctx.bank_val = bank_val;
  for (std::size_t i = 0; i < matrix.n_items(); ++i) {
    const auto it = store.index.find(matrix.item_ids[i]);
    if (it == store.index.end()) continue;
    const auto vec = store.vec(it->second);
    std::copy(vec.begin(), vec.end(), ctx.fdna.begin() + i * store.dim);
    ctx.has_fdna[i] = 1;
  }
  ctx.finalize();
  return ctx;
}

CustomerBank align_bank(const CustomerBank& bank,
                        const PurchaseMatrix& matrix,
                        std::span<const std::uint32_t> customer_set) {
  if (bank.customer_ids.size() != bank.size()) {
    throw data_error("align_bank: bank artifact lacks customer ids");
  }
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t r = 0; r < bank.customer_ids.size(); ++r) {
    row_of[bank.customer_ids[r]] = r;
  }
  CustomerBank aligned;
  aligned.dim = bank.dim;
  aligned.weights.reserve(customer_set.size() * bank.dim);
  aligned.biases.reserve(customer_set.size());
  for (std::uint32_t j : customer_set) {
    const auto& id = matrix.customer_ids[j];
    const auto it = row_of.find(id);
    if (it == row_of.end()) {
      throw data_error("missing customer bank row for customer " + id);
    }
    const auto w = bank.w(it->second);
    aligned.weights.insert(aligned.weights.end(), w.begin(), w.end());
    aligned.biases.push_back(bank.biases[it->second]);
    aligned.customer_ids.push_back(id);
  }
  return aligned;
}

void quadrant_scored_pairs(const ScoringContext& ctx, Quadrant which,
                           std::optional<std::size_t> pair_sample,
                           std::uint64_t seed, std::vector<double>* predicted,
                           std::vector<std::uint8_t>* bought) {
  const QuadrantView view = quadrant(*ctx.matrix, *ctx.split, which);
  const auto items = view.items();
  const auto customers = view.customers();
  if (items.empty() || customers.empty()) {
    throw data_error("quadrant_scored_pairs: empty quadrant");
  }
  const bool cust_val = which == Quadrant::tv || which == Quadrant::vv;
  if ((cust_val ? ctx.bank_val : ctx.bank_train) == nullptr) {
    throw data_error(std::string("missing ") +
                     (cust_val ? "validation" : "training") +
                     " customer bank for quadrant " + quadrant_name(which));
  }

  if (pair_sample) {
    const std::size_t m = *pair_sample;
    predicted->resize(m);
    bought->resize(m);
    // fixed-chunk sampling with per-chunk derived streams keeps the draw
    // deterministic and thread-count independent
    par::for_chunks(m, [&](std::size_t c, std::size_t lo, std::size_t hi) {
      Rng rng(mix_seed(seed, 0x5a3b, c));
      for (std::size_t s = lo; s < hi; ++s) {
        const std::uint32_t i =
            items[rng.uniform_int(items.size())];
        const std::uint32_t j =
            customers[rng.uniform_int(customers.size())];
        (*predicted)[s] = ctx.score(i, j);
        (*bought)[s] = ctx.matrix->has(i, j) ? 1 : 0;
      }
    });
    return;
  }

  const std::size_t total = items.size() * customers.size();
  predicted->resize(total);
  bought->resize(total);
  par::for_each(items.size(), [&](std::size_t a) {
    const std::uint32_t i = items[a];
    double* p_row = predicted->data() + a * customers.size();
    std::uint8_t* y_row = bought->data() + a * customers.size();
    const auto row = ctx.matrix->row(i);
    std::size_t cursor = 0;
    for (std::size_t b = 0; b < customers.size(); ++b) {
      const std::uint32_t j = customers[b];
      p_row[b] = ctx.score(i, j);
      while (cursor < row.size() && row[cursor] < j) ++cursor;
      y_row[b] = cursor < row.size() && row[cursor] == j ? 1 : 0;
    }
  });
}

double quadrant_auc(const ScoringContext& ctx, Quadrant which,
                    std::optional<std::size_t> pair_sample,
                    std::uint64_t seed) {
  std::vector<double> predicted;
  std::vector<std::uint8_t> bought;
  quadrant_scored_pairs(ctx, which, pair_sample, seed, &predicted, &bought);
  return auc_score(predicted, bought);
}

CustomerAucResult per_customer_auc_pairs(const ScoringContext& ctx,
                                         bool validation_customers) {
  const auto& customers = validation_customers ? ctx.split->customer_val
                                               : ctx.split->customer_train;
  const auto& item_train = ctx.split->item_train;
  const auto& item_val = ctx.split->item_val;

  std::vector<double> auc_t(customers.size(), -1.0);
  std::vector<double> auc_v(customers.size(), -1.0);

  par::for_each(customers.size(), [&](std::size_t r) {
    const std::uint32_t j = customers[r];
    auto one_side = [&](std::span<const std::uint32_t> item_set,
                        double* out) {
      std::vector<double> scores(item_set.size());
      std::vector<std::uint8_t> labels(item_set.size());
      std::size_t pos = 0;
      for (std::size_t a = 0; a < item_set.size(); ++a) {
        scores[a] = ctx.score(item_set[a], j);
        labels[a] = ctx.matrix->has(item_set[a], j) ? 1 : 0;
        pos += labels[a];
      }
      if (pos == 0 || pos == item_set.size()) return false;
      *out = auc_score(scores, labels);
      return true;
    };
    double at = 0.0, av = 0.0;
    if (one_side(item_train, &at) && one_side(item_val, &av)) {
      auc_t[r] = at;
      auc_v[r] = av;
    }
  });

  CustomerAucResult result;
  for (std::size_t r = 0; r < customers.size(); ++r) {
    if (auc_t[r] < 0.0) {
      ++result.skipped;
      continue;
    }
    result.pairs.push_back({ctx.matrix->customer_ids[customers[r]],
                            auc_t[r], auc_v[r]});
  }
  return result;
}

double pearson_r2(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw data_error("pearson_r2: length mismatch");
  if (x.size() < 2) throw data_error("pearson_r2: need at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double tol_x = 1e-24 * (std::abs(mx) + 1.0) * (std::abs(mx) + 1.0);
  const double tol_y = 1e-24 * (std::abs(my) + 1.0) * (std::abs(my) + 1.0);
  if (sxx <= tol_x || syy <= tol_y) {
    throw data_error("pearson_r2: zero variance");
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return r * r;
}

TopKResult top_k_capture(const ScoringContext& ctx,
                         bool validation_customers, std::size_t k) {
  if (k == 0) throw data_error("top_k_capture: k must be positive");
  const auto& customers = validation_customers ? ctx.split->customer_val
                                               : ctx.split->customer_train;
  const auto& item_val = ctx.split->item_val;

  std::vector<std::uint64_t> hits(customers.size(), 0);
  std::vector<std::uint64_t> purchases(customers.size(), 0);
  std::vector<std::uint8_t> counted(customers.size(), 0);

  par::for_each(customers.size(), [&](std::size_t r) {
    const std::uint32_t j = customers[r];
    std::vector<std::uint8_t> labels(item_val.size());
    std::size_t pos = 0;
    for (std::size_t a = 0; a < item_val.size(); ++a) {
      labels[a] = ctx.matrix->has(item_val[a], j) ? 1 : 0;
      pos += labels[a];
    }
    if (pos == 0) return;
    std::vector<double> scores(item_val.size());
    for (std::size_t a = 0; a < item_val.size(); ++a) {
      scores[a] = ctx.score(item_val[a], j);
    }
    std::vector<std::uint32_t> order(item_val.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(),
                      order.begin() + static_cast<long>(take), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                        if (scores[a] != scores[b]) {
                          return scores[a] > scores[b];
                        }
                        return a < b;
                      });
    std::uint64_t h = 0;
    for (std::size_t t = 0; t < take; ++t) h += labels[order[t]];
    hits[r] = h;
    purchases[r] = pos;
    counted[r] = 1;
  });

  TopKResult result;
  for (std::size_t r = 0; r < customers.size(); ++r) {
    if (!counted[r]) continue;
    ++result.customers;
    result.hits += hits[r];
    result.purchases += purchases[r];
  }
  result.capture = result.purchases > 0
                       ? static_cast<double>(result.hits) /
                             static_cast<double>(result.purchases)
                       : 0.0;
  return result;
}

}  // namespace fdna
