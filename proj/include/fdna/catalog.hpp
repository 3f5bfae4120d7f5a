#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fdna {

// Fixed family order; it defines the one-hot layout.
inline constexpr std::size_t kFamilyCount = 6;
inline constexpr const char* kFamilyNames[kFamilyCount] = {
    "brand", "commodity_group", "main_color",
    "pattern", "price_cluster", "fabric_cluster"};

struct Item {
  std::string id;
  std::optional<std::string> brand;
  std::optional<std::string> commodity_group;
  std::optional<std::string> main_color;
  std::optional<std::string> pattern;
  std::optional<double> raw_price;
  std::vector<double> fibers;  // dense over Catalog::fiber_names; empty = absent
  std::optional<int> price_cluster;   // derived by cluster_prices
  std::optional<int> fabric_cluster;  // derived by cluster_fabrics

  // Label string an item contributes to a family, if any. Derived cluster
  // labels render as decimal strings.
  std::optional<std::string> label(std::size_t family) const;
};

struct Catalog {
  std::vector<Item> items;
  std::vector<std::string> fiber_names;  // sorted basis for Item::fibers

  std::vector<std::string> ids() const;
};

struct TagFamily {
  std::string name;
  std::size_t class_count = 0;
  std::size_t offset = 0;
  std::vector<std::string> class_labels;   // class index -> label
  std::map<std::string, int> class_index;  // label -> class index
};

struct AttributeVocabulary {
  std::vector<TagFamily> families;
  std::size_t min_class_support = 50;
  std::size_t total_length = 0;

  const TagFamily* family(const std::string& name) const;
  std::uint64_t checksum() const;  // over the canonical text rendering
};

// canonical text rendering used for the vocabulary artifact and checksum
std::string vocabulary_body(const AttributeVocabulary& vocab);

// Sparse non-negative vector; entries sorted by index.
struct SparseVec {
  std::size_t size = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;
};

// One JSON object per line: item_id, brand, commodity_group, color,
// pattern (optional), price (optional), fibers (optional name->fraction map).
// See docs/FORMATS.md. Validates fiber compositions (entries in [0,1],
// sum within 1e-9 of 1).
Catalog load_catalog(std::istream& in);
Catalog load_catalog_file(const std::string& path);

// Classes with fewer than min_class_support items are dropped; class indices
// within a family go by descending frequency, then lexicographic label.
// Families with no retained class are omitted.
AttributeVocabulary build_vocabulary(const Catalog& catalog,
                                     std::size_t min_class_support);

struct ClusterLabels {
  std::map<std::string, int> assignment;  // item_id -> cluster index
  std::vector<std::vector<double>> centroids;
  std::vector<std::string> excluded;  // ids with unusable values, reported
};

// k-means over ln(price) of items with a positive price. Items with a
// non-positive price are excluded and reported; items without a price are
// simply unlabeled.
ClusterLabels cluster_prices(const Catalog& catalog, int k,
                             std::uint64_t seed);

// k-means over fiber composition vectors; items without a composition are
// unlabeled.
ClusterLabels cluster_fabrics(const Catalog& catalog, int k,
                              std::uint64_t seed);

void apply_price_clusters(Catalog& catalog, const ClusterLabels& labels);
void apply_fabric_clusters(Catalog& catalog, const ClusterLabels& labels);

// One 1.0 per present tag family at offset + class index; zero block for a
// missing family or a dropped class.
SparseVec encode_item(const Item& item, const AttributeVocabulary& vocab);

struct ItemSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

// Uniform random split, deterministic under seed; ids keep catalog order
// within each side.
ItemSplit split_items(const Catalog& catalog, double validation_fraction,
                      std::uint64_t seed);

}  // namespace fdna
