#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdna/network.hpp"
#include "fdna/purchases.hpp"

namespace fdna {

// Per-customer style vectors w_j and biases b_j.
struct CustomerBank {
  std::size_t dim = 0;
  std::vector<double> weights;  // count x dim, row-major
  std::vector<double> biases;   // count
  std::vector<std::string> customer_ids;  // aligned; may be empty

  std::size_t size() const { return biases.size(); }
  std::span<double> w(std::size_t j) {
    return {weights.data() + j * dim, dim};
  }
  std::span<const double> w(std::size_t j) const {
    return {weights.data() + j * dim, dim};
  }
};

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 50;
  std::size_t item_batch_size = 32;
  // per item per epoch: sample this many non-purchasing customers and
  // reweight by (K_t - n_i)/m; disabled = exact loss over all customers
  std::optional<std::size_t> negative_subsample;
  std::uint64_t seed = 0;
  double weight_init_sigma = 0.01;  // customer style vector init
  // optional L2 pull on customer style vectors during training; 0 keeps the
  // plain joint objective (the paper leaves customer regularization open)
  double customer_l2 = 0.0;
};

// p = sigma(f . w + b), strictly inside (0,1)
double predict_probability(std::span<const double> f,
                           std::span<const double> w, double b);

struct ClampStats {
  std::uint64_t low = 0;
  std::uint64_t high = 0;
  std::uint64_t total() const { return low + high; }
};

inline constexpr double kProbClamp = 1e-12;

// mean cross-entropy; probabilities at 0 or 1 are clamped to
// [kProbClamp, 1-kProbClamp] and counted
double cross_entropy(std::span<const double> p,
                     std::span<const std::uint8_t> labels,
                     ClampStats* stats = nullptr);
double pair_loss(double p, bool bought, ClampStats* stats = nullptr);

// w_j ~ N(0, sigma^2); b_j = logit(rate_j) with the rate clamped to
// [eps, 1-eps], eps = 1/(2 N_t), rates over training items only
CustomerBank init_customer_bank(const PurchaseMatrix& matrix,
                                const QuadrantSplit& split, std::size_t dim,
                                std::uint64_t seed, double sigma);

// Item side of the factorization, pluggable per channel. Batch slots hold
// forward caches; gradients accumulate into fixed chunks so results do not
// depend on the thread count.
class ItemEmbedder {
 public:
  virtual ~ItemEmbedder() = default;
  virtual std::size_t dim() const = 0;
  virtual bool trainable() const { return true; }
  virtual void begin_batch(std::size_t slots) = 0;
  virtual void forward_slot(std::size_t slot, std::uint32_t item,
                            Mode mode, std::uint64_t dropout_seed,
                            double* out) = 0;
  virtual void backward_slot(std::size_t slot, std::size_t chunk,
                             std::span<const double> dout) = 0;
  virtual void step(double lr, double momentum) = 0;
  virtual bool finite() const { return true; }  // divergence probe
};

// MLP channel over sparse attribute encodings (encodings indexed by matrix
// item index).
class MlpEmbedder : public ItemEmbedder {
 public:
  MlpEmbedder(EmbeddingModel& model, const std::vector<SparseVec>& encodings);
  std::size_t dim() const override;
  void begin_batch(std::size_t slots) override;
  void forward_slot(std::size_t slot, std::uint32_t item, Mode mode,
                    std::uint64_t dropout_seed, double* out) override;
  void backward_slot(std::size_t slot, std::size_t chunk,
                     std::span<const double> dout) override;
  void step(double lr, double momentum) override;
  bool finite() const override;

 private:
  EmbeddingModel& model_;
  const std::vector<SparseVec>& encodings_;
  std::vector<ForwardCache> caches_;
  std::vector<Gradients> chunk_grads_;
  Gradients velocity_;
  std::size_t chunks_ = 0;
};

// Fixed dense feature channel; nothing to train on the item side.
class PrecomputedEmbedder : public ItemEmbedder {
 public:
  PrecomputedEmbedder(const FeatureChannel& features,
                      const std::vector<std::string>& item_ids);
  std::size_t dim() const override;
  bool trainable() const override { return false; }
  void begin_batch(std::size_t) override {}
  void forward_slot(std::size_t slot, std::uint32_t item, Mode mode,
                    std::uint64_t dropout_seed, double* out) override;
  void backward_slot(std::size_t, std::size_t,
                     std::span<const double>) override {}
  void step(double, double) override {}

 private:
  const FeatureChannel& features_;
  const std::vector<std::string>& item_ids_;
};

// Frozen channels + trainable merge layer.
class CombinedEmbedder : public ItemEmbedder {
 public:
  CombinedEmbedder(CombinedModel& model,
                   const std::vector<SparseVec>& encodings_a,
                   const std::vector<std::string>& item_ids,
                   const std::vector<SparseVec>* encodings_b = nullptr);
  std::size_t dim() const override;
  void begin_batch(std::size_t slots) override;
  void forward_slot(std::size_t slot, std::uint32_t item, Mode mode,
                    std::uint64_t dropout_seed, double* out) override;
  void backward_slot(std::size_t slot, std::size_t chunk,
                     std::span<const double> dout) override;
  void step(double lr, double momentum) override;
  bool finite() const override;

 private:
  CombinedModel& model_;
  const std::vector<SparseVec>& encodings_a_;
  const std::vector<std::string>& item_ids_;
  const std::vector<SparseVec>* encodings_b_;
  std::vector<CombinedCache> caches_;
  std::vector<MergeGradients> chunk_grads_;
  MergeGradients velocity_;
  std::size_t chunks_ = 0;
};

struct TrainResult {
  CustomerBank bank;
  // [0] = exact loss before training (dropout off), then one mean training
  // loss per epoch
  std::vector<double> loss_history;
  ClampStats clamps;
  double fdna_zero_fraction = 0.0;  // sparsity of trained fDNA, reported
};

// Joint SGD with momentum over the item channel and the customer bank on the
// training quadrant. Deterministic under config.seed; throws numeric_error
// with the epoch and learning rate if the loss diverges.
TrainResult train(ItemEmbedder& embedder, const PurchaseMatrix& matrix,
                  const QuadrantSplit& split, const TrainConfig& config);

// Exact mean loss of the current parameters over one quadrant.
double exact_quadrant_loss(ItemEmbedder& embedder,
                           const PurchaseMatrix& matrix,
                           const QuadrantSplit& split, Quadrant which,
                           const CustomerBank& bank,
                           ClampStats* stats = nullptr);

struct FitConfig {
  double l2_lambda = 1e-4;  // on w only, not the bias
  int max_iterations = 500;
  double tolerance = 1e-7;  // projected gradient infinity norm
  std::uint64_t seed = 0;   // reserved; the fit itself is deterministic
};

struct FitResult {
  CustomerBank bank;
  std::vector<std::uint8_t> converged;
  std::vector<int> iterations;
};

// K_v independent regularized logistic regressions from frozen fDNA rows to
// each held-out customer's purchase column over the training items. Biases
// are box-constrained to [logit(eps), logit(1-eps)], eps = 1/(2 N_t), the
// resolution limit of the training window. Non-converged customers keep
// their best iterate and are flagged.
FitResult fit_customers(const std::vector<double>& fdna_rows,  // N_t x dim
                        std::size_t dim,
                        const std::vector<std::uint32_t>& item_train,
                        const PurchaseMatrix& matrix,
                        const std::vector<std::uint32_t>& customers,
                        const FitConfig& config);

}  // namespace fdna
