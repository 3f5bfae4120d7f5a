#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdna/catalog.hpp"
#include "fdna/network.hpp"
#include "fdna/purchases.hpp"
#include "fdna/similarity.hpp"
#include "fdna/training.hpp"

namespace fdna {

// Model artifact: text header (layer widths, activation, dropout, seed,
// input checksum) + END marker + row-major 64-bit little-endian payload,
// with a payload checksum line in the header. See docs/FORMATS.md.
std::string model_to_string(const EmbeddingModel& model);
EmbeddingModel model_from_string(const std::string& blob,
                                 const std::string& origin);
void save_model(const EmbeddingModel& model, const std::string& path);
EmbeddingModel load_model(const std::string& path);

// Combined artifact embeds channel A (and channel B when it is a network);
// a precomputed channel is referenced by width + checksum and must be
// supplied at load time.
struct CombinedHeader {
  bool precomputed_channel = false;
  std::size_t features_width = 0;
  std::uint64_t features_checksum = 0;
};
CombinedHeader read_combined_header(const std::string& path);
void save_combined(const CombinedModel& model, const std::string& path);
CombinedModel load_combined(const std::string& path,
                            const FeatureChannel* features);

void save_bank(const CustomerBank& bank, const std::string& path);
CustomerBank load_bank(const std::string& path);

// Embedding store: magic FDNAVEC1, u64 count, u64 dim, count*dim f64,
// count 64-byte NUL-padded id slots, u64 FNV checksum.
void save_store(const EmbeddingStore& store, const std::string& path);
EmbeddingStore load_store(const std::string& path);

void save_vocabulary(const AttributeVocabulary& vocab,
                     const std::string& path);
AttributeVocabulary load_vocabulary(const std::string& path);

// Derived price/fabric cluster labels per item. Training writes them so
// downstream encoders reproduce the exact same derived tags without
// re-running k-means.
void save_derived_labels(const Catalog& catalog, const std::string& path);
void apply_derived_labels(Catalog& catalog, const std::string& path);

struct SplitManifest {
  std::uint64_t seed = 0;
  double item_fraction = 0.0;
  double customer_fraction = 0.0;
  std::vector<std::string> item_train, item_val;
  std::vector<std::string> customer_train, customer_val;
};

void save_split(const SplitManifest& manifest, const std::string& path);
SplitManifest load_split(const std::string& path);
SplitManifest make_split_manifest(const PurchaseMatrix& matrix,
                                  const QuadrantSplit& split,
                                  std::uint64_t seed, double item_fraction,
                                  double customer_fraction);
QuadrantSplit resolve_split(const SplitManifest& manifest,
                            const PurchaseMatrix& matrix);

}  // namespace fdna
