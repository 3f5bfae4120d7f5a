#include "fdna/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fdna/errors.hpp"
#include "fdna/kmeans.hpp"
#include "fdna/rng.hpp"

namespace fdna {

namespace {

int family_slot(const std::string& name) {
  for (std::size_t i = 0; i < kFamilyCount; ++i) {
    if (name == kFamilyNames[i]) return static_cast<int>(i);
  }
  throw data_error("unknown tag family: " + name);
}

}  // namespace

std::optional<std::string> Item::label(std::size_t family) const {
  switch (family) {
    case 0: return brand;
    case 1: return commodity_group;
    case 2: return main_color;
    case 3: return pattern;
    case 4:
      if (price_cluster) return std::to_string(*price_cluster);
      return std::nullopt;
    case 5:
      if (fabric_cluster) return std::to_string(*fabric_cluster);
      return std::nullopt;
    default: throw data_error("tag family index out of range");
  }
}

std::vector<std::string> Catalog::ids() const {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(item.id);
  return out;
}

const TagFamily* AttributeVocabulary::family(const std::string& name) const {
  for (const auto& f : families) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::string vocabulary_body(const AttributeVocabulary& vocab) {
  std::ostringstream out;
  out << "families " << vocab.families.size() << " total "
      << vocab.total_length << " min_support " << vocab.min_class_support
      << "\n";
  for (const auto& f : vocab.families) {
    for (std::size_t c = 0; c < f.class_labels.size(); ++c) {
      out << f.name << '\t' << f.class_labels[c] << '\t' << c << '\t'
          << f.offset << '\n';
    }
  }
  return out.str();
}

std::uint64_t AttributeVocabulary::checksum() const {
  const std::string body = vocabulary_body(*this);
  return fnv1a64(body.data(), body.size());
}

Catalog load_catalog(std::istream& in) {
  Catalog catalog;
  std::set<std::string> seen_ids;
  std::set<std::string> fiber_names;
  std::vector<std::map<std::string, double>> raw_fibers;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw data_error("catalog line " + std::to_string(line_no) +
                       ": invalid JSON: " + e.what());
    }
    if (!record.contains("item_id") || !record["item_id"].is_string()) {
      throw data_error("catalog line " + std::to_string(line_no) +
                       ": missing item_id");
    }
    Item item;
    item.id = record["item_id"].get<std::string>();
    if (!seen_ids.insert(item.id).second) {
      throw data_error("catalog line " + std::to_string(line_no) +
                       ": duplicate item_id " + item.id);
    }
    auto text_field = [&](const char* key) -> std::optional<std::string> {
      if (!record.contains(key) || record[key].is_null()) return std::nullopt;
      if (!record[key].is_string()) {
        throw data_error("catalog line " + std::to_string(line_no) + ": " +
                         key + " must be a string");
      }
      return record[key].get<std::string>();
    };
    item.brand = text_field("brand");
    item.commodity_group = text_field("commodity_group");
    item.main_color = text_field("color");
    item.pattern = text_field("pattern");
    if (record.contains("price") && !record["price"].is_null()) {
      if (!record["price"].is_number()) {
        throw data_error("catalog line " + std::to_string(line_no) +
                         ": price must be a number");
      }
      item.raw_price = record["price"].get<double>();
    }
    std::map<std::string, double> fibers;
    if (record.contains("fibers") && !record["fibers"].is_null()) {
      if (!record["fibers"].is_object()) {
        throw data_error("catalog line " + std::to_string(line_no) +
                         ": fibers must be an object");
      }
      double total = 0.0;
      for (auto it = record["fibers"].begin(); it != record["fibers"].end();
           ++it) {
        if (!it.value().is_number()) {
          throw data_error("catalog line " + std::to_string(line_no) +
                           ": fiber fraction must be a number");
        }
        const double frac = it.value().get<double>();
        if (frac < 0.0 || frac > 1.0) {
          throw data_error("item " + item.id +
                           ": fiber fraction outside [0,1]");
        }
        fibers[it.key()] = frac;
        fiber_names.insert(it.key());
        total += frac;
      }
      if (!fibers.empty() && std::abs(total - 1.0) > 1e-9) {
        throw data_error("item " + item.id +
                         ": fiber composition does not sum to 1");
      }
    }
    raw_fibers.push_back(std::move(fibers));
    catalog.items.push_back(std::move(item));
  }

  catalog.fiber_names.assign(fiber_names.begin(), fiber_names.end());
  for (std::size_t i = 0; i < catalog.items.size(); ++i) {
    if (raw_fibers[i].empty()) continue;
    auto& dense = catalog.items[i].fibers;
    dense.assign(catalog.fiber_names.size(), 0.0);
    for (const auto& [name, frac] : raw_fibers[i]) {
      const auto it = std::lower_bound(catalog.fiber_names.begin(),
                                       catalog.fiber_names.end(), name);
      dense[static_cast<std::size_t>(
          it - catalog.fiber_names.begin())] = frac;
    }
  }
  return catalog;
}

Catalog load_catalog_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open catalog file: " + path);
  return load_catalog(in);
}

AttributeVocabulary build_vocabulary(const Catalog& catalog,
                                     std::size_t min_class_support) {
  if (catalog.items.empty()) {
    throw data_error("build_vocabulary: empty item collection");
  }
  AttributeVocabulary vocab;
  vocab.min_class_support = min_class_support;

  std::size_t offset = 0;
  for (std::size_t slot = 0; slot < kFamilyCount; ++slot) {
    std::map<std::string, std::size_t> counts;
    for (const auto& item : catalog.items) {
      if (auto lab = item.label(slot)) ++counts[*lab];
    }
    std::vector<std::pair<std::string, std::size_t>> retained;
    for (const auto& [label, count] : counts) {
      if (count >= min_class_support) retained.emplace_back(label, count);
    }
    if (retained.empty()) continue;
    std::sort(retained.begin(), retained.end(),
              [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
              });
    TagFamily family;
    family.name = kFamilyNames[slot];
    family.offset = offset;
    family.class_count = retained.size();
    for (std::size_t c = 0; c < retained.size(); ++c) {
      family.class_labels.push_back(retained[c].first);
      family.class_index[retained[c].first] = static_cast<int>(c);
    }
    offset += family.class_count;
    vocab.families.push_back(std::move(family));
  }
  vocab.total_length = offset;
  return vocab;
}

namespace {

ClusterLabels cluster_generic(
    const std::vector<std::pair<std::string, std::vector<double>>>& rows,
    const std::vector<std::string>& excluded, int k, std::uint64_t seed) {
  if (rows.empty()) throw data_error("clustering: no usable items");
  std::vector<std::vector<double>> points;
  points.reserve(rows.size());
  for (const auto& [id, vec] : rows) points.push_back(vec);
  KMeansResult km = kmeans(points, k, seed);
  ClusterLabels labels;
  labels.centroids = km.centroids;
  labels.excluded = excluded;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    labels.assignment[rows[i].first] = km.assignment[i];
  }
  return labels;
}

}  // namespace

ClusterLabels cluster_prices(const Catalog& catalog, int k,
                             std::uint64_t seed) {
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  std::vector<std::string> excluded;
  for (const auto& item : catalog.items) {
    if (!item.raw_price) continue;
    if (*item.raw_price <= 0.0) {
      excluded.push_back(item.id);
      continue;
    }
    rows.emplace_back(item.id,
                      std::vector<double>{std::log(*item.raw_price)});
  }
  return cluster_generic(rows, excluded, k, seed);
}

ClusterLabels cluster_fabrics(const Catalog& catalog, int k,
                              std::uint64_t seed) {
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (const auto& item : catalog.items) {
    if (item.fibers.empty()) continue;
    rows.emplace_back(item.id, item.fibers);
  }
  return cluster_generic(rows, {}, k, seed);
}

void apply_price_clusters(Catalog& catalog, const ClusterLabels& labels) {
  for (auto& item : catalog.items) {
    const auto it = labels.assignment.find(item.id);
    if (it != labels.assignment.end()) item.price_cluster = it->second;
  }
}

void apply_fabric_clusters(Catalog& catalog, const ClusterLabels& labels) {
  for (auto& item : catalog.items) {
    const auto it = labels.assignment.find(item.id);
    if (it != labels.assignment.end()) item.fabric_cluster = it->second;
  }
}

SparseVec encode_item(const Item& item, const AttributeVocabulary& vocab) {
  SparseVec vec;
  vec.size = vocab.total_length;
  for (const auto& family : vocab.families) {
    const int slot = family_slot(family.name);
    const auto lab = item.label(static_cast<std::size_t>(slot));
    if (!lab) continue;
    const auto it = family.class_index.find(*lab);
    if (it == family.class_index.end()) continue;  // dropped class: zeros
    if (it->second < 0 ||
        static_cast<std::size_t>(it->second) >= family.class_count) {
      throw data_error("encode_item: class index out of range for family " +
                       family.name);
    }
    vec.entries.emplace_back(
        static_cast<std::uint32_t>(family.offset +
                                   static_cast<std::size_t>(it->second)),
        1.0);
  }
  return vec;
}

ItemSplit split_items(const Catalog& catalog, double validation_fraction,
                      std::uint64_t seed) {
  const std::size_t n = catalog.items.size();
  if (n < 2) throw data_error("split_items: need at least 2 items");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw data_error("split_items: fraction must lie in (0,1)");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x17e35));
  for (std::size_t i = n; i-- > 1;) {
    std::swap(order[i], order[rng.uniform_int(i + 1)]);
  }
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * validation_fraction));
  n_val = std::max<std::size_t>(1, std::min(n_val, n - 1));

  std::vector<std::size_t> val(order.begin(),
                               order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<long>(n_val),
                                 order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());

  ItemSplit split;
  for (std::size_t i : train) split.train_ids.push_back(catalog.items[i].id);
  for (std::size_t i : val) split.val_ids.push_back(catalog.items[i].id);
  return split;
}

}  // namespace fdna
