#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fdna/catalog.hpp"
#include "fdna/purchases.hpp"
#include "fdna/rng.hpp"

namespace testutil {

inline fdna::Item make_item(std::string id, const char* brand = nullptr,
                            const char* group = nullptr,
                            const char* color = nullptr,
                            const char* pattern = nullptr) {
  fdna::Item item;
  item.id = std::move(id);
  if (brand) item.brand = brand;
  if (group) item.commodity_group = group;
  if (color) item.main_color = color;
  if (pattern) item.pattern = pattern;
  return item;
}

// brute-force pairwise AUC with half credit for ties; the independent oracle
// for the sort-based implementation
inline double brute_force_auc(std::span<const double> scores,
                              std::span<const std::uint8_t> labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < scores.size(); ++a) {
    if (!labels[a]) continue;
    for (std::size_t b = 0; b < scores.size(); ++b) {
      if (labels[b]) continue;
      ++pairs;
      if (scores[a] > scores[b]) {
        wins += 1.0;
      } else if (scores[a] == scores[b]) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

inline std::vector<double> ranks_with_ties(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) rank[order[t]] = avg;
    i = j;
  }
  return rank;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = ranks_with_ties(x);
  const auto ry = ranks_with_ties(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// random sparse matrix over generated ids
inline fdna::PurchaseMatrix random_matrix(std::size_t items,
                                          std::size_t customers,
                                          double density,
                                          std::uint64_t seed) {
  std::vector<std::string> item_ids, customer_ids;
  for (std::size_t i = 0; i < items; ++i) {
    item_ids.push_back("i" + std::to_string(i));
  }
  for (std::size_t j = 0; j < customers; ++j) {
    customer_ids.push_back("c" + std::to_string(j));
  }
  fdna::Rng rng(seed);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;
  for (std::uint32_t i = 0; i < items; ++i) {
    for (std::uint32_t j = 0; j < customers; ++j) {
      if (rng.uniform() < density) entries.emplace_back(i, j);
    }
  }
  return fdna::make_matrix(item_ids, customer_ids, std::move(entries));
}

}  // namespace testutil
