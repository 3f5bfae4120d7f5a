#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdna/purchases.hpp"
#include "fdna/similarity.hpp"
#include "fdna/training.hpp"

namespace fdna {

struct CalibrationBin {
  double mean_predicted = 0.0;
  double empirical_rate = 0.0;
  std::size_t count = 0;
  std::size_t positives = 0;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;  // ascending predicted probability
  std::size_t sample_size = 0;
  std::size_t bin_count = 0;
};

// Equal-count binning by predicted probability (sizes differ by at most 1).
CalibrationReport calibrate(std::span<const double> predicted,
                            std::span<const std::uint8_t> bought,
                            std::size_t bin_count);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from threshold 1 to 0, (0,0) .. (1,1)
  double auc = 0.0;
};

// AUC equals the Mann-Whitney statistic (ties get half credit), computed by
// sort; a point is emitted at every distinct threshold. Throws numeric_error
// when only one class is present.
RocCurve roc_auc(std::span<const double> scores,
                 std::span<const std::uint8_t> labels);

// AUC without materializing the curve.
double auc_score(std::span<const double> scores,
                 std::span<const std::uint8_t> labels);

// Model + banks resolved against a matrix and split; fdna is indexed by
// matrix item index (rows of d values; a missing item has an empty slot).
struct ScoringContext {
  const PurchaseMatrix* matrix = nullptr;
  const QuadrantSplit* split = nullptr;
  std::size_t dim = 0;
  std::vector<double> fdna;          // n_items x dim
  std::vector<std::uint8_t> has_fdna;
  const CustomerBank* bank_train = nullptr;  // rows follow customer_train
  const CustomerBank* bank_val = nullptr;    // rows follow customer_val
  std::vector<std::int32_t> train_row, val_row;

  void finalize();  // builds the row maps
  double score(std::uint32_t item, std::uint32_t customer) const;
};

ScoringContext make_scoring_context(const PurchaseMatrix& matrix,
                                    const QuadrantSplit& split,
                                    ItemEmbedder& embedder,
                                    const CustomerBank* bank_train,
                                    const CustomerBank* bank_val);

// fDNA rows taken from an embedding store (items missing from the store
// stay unscorable and raise data_error if a quadrant touches them)
ScoringContext make_scoring_context_from_store(
    const PurchaseMatrix& matrix, const QuadrantSplit& split,
    const EmbeddingStore& store, const CustomerBank* bank_train,
    const CustomerBank* bank_val);

// permute bank rows into the order of the given customer index set,
// matching by customer id; missing customers raise data_error
CustomerBank align_bank(const CustomerBank& bank,
                        const PurchaseMatrix& matrix,
                        std::span<const std::uint32_t> customer_set);

// AUC over one quadrant: every pair when pair_sample is unset, otherwise a
// uniform with-replacement sample of pairs, deterministic under seed.
double quadrant_auc(const ScoringContext& ctx, Quadrant which,
                    std::optional<std::size_t> pair_sample = std::nullopt,
                    std::uint64_t seed = 0);

// (probability, label) pairs of a quadrant, for calibration reports.
void quadrant_scored_pairs(const ScoringContext& ctx, Quadrant which,
                           std::optional<std::size_t> pair_sample,
                           std::uint64_t seed, std::vector<double>* predicted,
                           std::vector<std::uint8_t>* bought);

struct CustomerAucPair {
  std::string customer_id;
  double auc_train_items = 0.0;
  double auc_val_items = 0.0;
};

struct CustomerAucResult {
  std::vector<CustomerAucPair> pairs;
  std::size_t skipped = 0;  // customers without both classes in both sets
};

// Per-customer AUC on the item-train and item-val sets, for the chosen
// customer side.
CustomerAucResult per_customer_auc_pairs(const ScoringContext& ctx,
                                         bool validation_customers);

// Square of the sample Pearson correlation.
double pearson_r2(std::span<const double> x, std::span<const double> y);

struct TopKResult {
  double capture = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t purchases = 0;
  std::size_t customers = 0;
};

// Fraction of validation-item purchases captured in each customer's top-k
// ranking of validation items (ties break toward the lower item index).
TopKResult top_k_capture(const ScoringContext& ctx,
                         bool validation_customers, std::size_t k);

}  // namespace fdna
