#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace fdna {

// D = 1 - f.g / (|f||g|); identical vectors are defined to have distance 0.
// Throws data_error for zero vectors or mismatched lengths.
double cosine_distance(std::span<const double> f, std::span<const double> g);

// In-memory embedding store; binary layout documented in docs/FORMATS.md.
struct EmbeddingStore {
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<double> vectors;  // ids.size() x dim
  std::unordered_map<std::string, std::size_t> index;
  std::vector<double> norms;  // squared norms, built by finalize()

  std::size_t size() const { return ids.size(); }
  std::span<const double> vec(std::size_t i) const {
    return {vectors.data() + i * dim, dim};
  }
  void add(const std::string& id, std::span<const double> v);
  void finalize();
};

struct Neighbor {
  std::string id;
  double distance = 0.0;
};

struct NeighborResult {
  std::string query;
  std::vector<Neighbor> neighbors;        // distance ascending
  std::size_t zero_norm_skipped = 0;      // store items without a direction
};

// Exact k nearest neighbors by full scan; ties break by item id ascending;
// the query never appears in its own list. Items with zero norm cannot carry
// a cosine distance and are skipped (counted in the result).
NeighborResult nearest_neighbors(const EmbeddingStore& store,
                                 const std::string& query_id, std::size_t k);

}  // namespace fdna
