#include "fdna/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "fdna/errors.hpp"
#include "fdna/mathutil.hpp"
#include "fdna/parallel.hpp"

namespace fdna {

namespace {

bool identical(std::span<const double> f, std::span<const double> g) {
  return f.size() == g.size() &&
         std::memcmp(f.data(), g.data(), f.size() * sizeof(double)) == 0;
}

double cosine_with_norms(std::span<const double> f, double nf,
                         std::span<const double> g, double ng) {
  if (identical(f, g)) return 0.0;
  return 1.0 - dot(f.data(), g.data(), f.size()) / std::sqrt(nf * ng);
}

}  // namespace

double cosine_distance(std::span<const double> f, std::span<const double> g) {
  if (f.size() != g.size()) {
    throw data_error("cosine_distance: length mismatch");
  }
  if (f.empty()) throw data_error("cosine_distance: empty vectors");
  const double nf = dot(f.data(), f.data(), f.size());
  const double ng = dot(g.data(), g.data(), g.size());
  if (nf == 0.0 || ng == 0.0) {
    throw data_error("cosine_distance: zero vector");
  }
  return cosine_with_norms(f, nf, g, ng);
}

void EmbeddingStore::add(const std::string& id, std::span<const double> v) {
  if (dim == 0) dim = v.size();
  if (v.size() != dim) {
    throw data_error("embedding store: inconsistent dimension for '" + id +
                     "'");
  }
  if (index.count(id)) {
    throw data_error("embedding store: duplicate id '" + id + "'");
  }
  index[id] = ids.size();
  ids.push_back(id);
  vectors.insert(vectors.end(), v.begin(), v.end());
}

void EmbeddingStore::finalize() {
  norms.resize(size());
  par::for_each(size(), [&](std::size_t i) {
    norms[i] = dot(vec(i).data(), vec(i).data(), dim);
  });
}

NeighborResult nearest_neighbors(const EmbeddingStore& store,
                                 const std::string& query_id, std::size_t k) {
  const auto it = store.index.find(query_id);
  if (it == store.index.end()) {
    throw data_error("nearest_neighbors: unknown item '" + query_id + "'");
  }
  if (k == 0) throw data_error("nearest_neighbors: k must be positive");
  if (k >= store.size()) {
    throw data_error("nearest_neighbors: k must be smaller than the store");
  }
  if (store.norms.size() != store.size()) {
    throw data_error("nearest_neighbors: store not finalized");
  }
  const std::size_t q = it->second;
  const auto f = store.vec(q);
  const double nf = store.norms[q];
  if (nf == 0.0) {
    throw data_error("nearest_neighbors: query vector has zero norm");
  }

  std::vector<double> dist(store.size());
  par::for_each(store.size(), [&](std::size_t i) {
    dist[i] = store.norms[i] == 0.0
                  ? std::numeric_limits<double>::infinity()
                  : cosine_with_norms(f, nf, store.vec(i), store.norms[i]);
  });

  std::vector<std::uint32_t> order;
  order.reserve(store.size() - 1);
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (i == q) continue;
    if (store.norms[i] == 0.0) {
      ++skipped;
      continue;
    }
    order.push_back(static_cast<std::uint32_t>(i));
  }
  if (order.size() < k) {
    throw data_error(
        "nearest_neighbors: not enough candidates with a direction (" +
        std::to_string(skipped) + " zero-norm items skipped)");
  }
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(k),
                    order.end(), [&](std::uint32_t a, std::uint32_t b) {
                      if (dist[a] != dist[b]) return dist[a] < dist[b];
                      return store.ids[a] < store.ids[b];
                    });

  NeighborResult result;
  result.query = query_id;
  result.zero_norm_skipped = skipped;
  result.neighbors.reserve(k);
  for (std::size_t t = 0; t < k; ++t) {
    result.neighbors.push_back({store.ids[order[t]], dist[order[t]]});
  }
  return result;
}

}  // namespace fdna
