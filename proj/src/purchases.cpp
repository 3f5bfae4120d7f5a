#include "fdna/purchases.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>

#include "fdna/errors.hpp"
#include "fdna/rng.hpp"

namespace fdna {

std::span<const std::uint32_t> PurchaseMatrix::row(std::size_t item) const {
  return {col.data() + row_ptr[item], row_ptr[item + 1] - row_ptr[item]};
}

bool PurchaseMatrix::has(std::size_t item, std::size_t customer) const {
  const auto r = row(item);
  return std::binary_search(r.begin(), r.end(),
                            static_cast<std::uint32_t>(customer));
}

double PurchaseMatrix::density() const {
  const double cells =
      static_cast<double>(n_items()) * static_cast<double>(n_customers());
  return cells > 0.0 ? static_cast<double>(n_entries()) / cells : 0.0;
}

std::vector<std::size_t> PurchaseMatrix::customer_counts() const {
  std::vector<std::size_t> counts(n_customers(), 0);
  for (std::uint32_t j : col) ++counts[j];
  return counts;
}

PurchaseMatrix make_matrix(
    std::vector<std::string> item_ids, std::vector<std::string> customer_ids,
    std::vector<std::pair<std::uint32_t, std::uint32_t>> entries) {
  PurchaseMatrix m;
  m.item_ids = std::move(item_ids);
  m.customer_ids = std::move(customer_ids);
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
  m.row_ptr.assign(m.item_ids.size() + 1, 0);
  for (const auto& [i, j] : entries) {
    if (i >= m.item_ids.size() || j >= m.customer_ids.size()) {
      throw data_error("make_matrix: entry index out of range");
    }
    ++m.row_ptr[i + 1];
  }
  for (std::size_t i = 0; i < m.item_ids.size(); ++i) {
    m.row_ptr[i + 1] += m.row_ptr[i];
  }
  m.col.resize(entries.size());
  std::vector<std::size_t> cursor(m.row_ptr.begin(), m.row_ptr.end() - 1);
  for (const auto& [i, j] : entries) m.col[cursor[i]++] = j;
  return m;
}

PurchaseMatrix load_purchases(std::istream& in,
                              const std::vector<std::string>& item_order,
                              const std::vector<std::string>& customer_order,
                              LoadStats* stats) {
  std::map<std::string, std::uint32_t> item_index, customer_index;
  for (std::size_t i = 0; i < item_order.size(); ++i) {
    item_index[item_order[i]] = static_cast<std::uint32_t>(i);
  }
  for (std::size_t j = 0; j < customer_order.size(); ++j) {
    customer_index[customer_order[j]] = static_cast<std::uint32_t>(j);
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;
  std::string line;
  std::size_t line_no = 0, lines = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ++lines;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw data_error("purchases line " + std::to_string(line_no) +
                       ": expected customer_id,item_id");
    }
    const std::string customer = line.substr(0, comma);
    const std::string item = line.substr(comma + 1);
    const auto ci = customer_index.find(customer);
    if (ci == customer_index.end()) {
      throw data_error("purchases line " + std::to_string(line_no) +
                       ": unknown customer_id '" + customer + "'");
    }
    const auto ii = item_index.find(item);
    if (ii == item_index.end()) {
      throw data_error("purchases line " + std::to_string(line_no) +
                       ": unknown item_id '" + item + "'");
    }
    entries.emplace_back(ii->second, ci->second);
  }

  const std::size_t raw = entries.size();
  PurchaseMatrix m = make_matrix(item_order, customer_order,
                                 std::move(entries));
  if (stats) {
    stats->lines = lines;
    stats->entries = m.n_entries();
    stats->duplicates = raw - m.n_entries();
  }
  return m;
}

PurchaseMatrix load_purchases_file(const std::string& path,
                                   const std::vector<std::string>& item_order,
                                   LoadStats* stats) {
  std::ifstream scan(path);
  if (!scan) throw data_error("cannot open purchases file: " + path);
  std::set<std::string> customers;
  std::string line;
  while (std::getline(scan, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;  // load_purchases reports it
    customers.insert(line.substr(0, comma));
  }
  std::ifstream in(path);
  return load_purchases(
      in, item_order,
      std::vector<std::string>(customers.begin(), customers.end()), stats);
}

const char* quadrant_name(Quadrant q) {
  switch (q) {
    case Quadrant::tt: return "tt";
    case Quadrant::vt: return "vt";
    case Quadrant::tv: return "tv";
    case Quadrant::vv: return "vv";
  }
  return "?";
}

Quadrant quadrant_from_name(const std::string& name) {
  if (name == "tt") return Quadrant::tt;
  if (name == "vt") return Quadrant::vt;
  if (name == "tv") return Quadrant::tv;
  if (name == "vv") return Quadrant::vv;
  throw data_error("unknown quadrant: " + name);
}

void QuadrantSplit::rebuild_masks(std::size_t n_items,
                                  std::size_t n_customers) {
  item_is_val.assign(n_items, 0);
  for (std::uint32_t i : item_val) item_is_val[i] = 1;
  customer_is_val.assign(n_customers, 0);
  for (std::uint32_t j : customer_val) customer_is_val[j] = 1;
}

QuadrantSplit split_customers(const PurchaseMatrix& matrix,
                              const std::vector<std::string>& item_val_ids,
                              double validation_fraction,
                              std::uint64_t seed) {
  const std::size_t n_customers = matrix.n_customers();
  if (n_customers < 2) {
    throw data_error("split_customers: need at least 2 customers");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw data_error("split_customers: fraction must lie in (0,1)");
  }

  QuadrantSplit split;

  // item side: resolve the given validation ids
  std::map<std::string, std::uint32_t> item_index;
  for (std::size_t i = 0; i < matrix.n_items(); ++i) {
    item_index[matrix.item_ids[i]] = static_cast<std::uint32_t>(i);
  }
  std::set<std::uint32_t> val_items;
  for (const auto& id : item_val_ids) {
    const auto it = item_index.find(id);
    if (it == item_index.end()) {
      throw data_error("split_customers: unknown validation item id '" + id +
                       "'");
    }
    val_items.insert(it->second);
  }
  for (std::uint32_t i = 0; i < matrix.n_items(); ++i) {
    if (val_items.count(i)) {
      split.item_val.push_back(i);
    } else {
      split.item_train.push_back(i);
    }
  }

  // customer side: decile stratification over purchase counts
  const auto counts = matrix.customer_counts();
  std::vector<std::uint32_t> order(n_customers);
  for (std::uint32_t j = 0; j < n_customers; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (counts[a] != counts[b]) return counts[a] < counts[b];
                     return a < b;
                   });

  const std::size_t total_val = std::max<std::size_t>(
      1, std::min<std::size_t>(
             n_customers - 1,
             static_cast<std::size_t>(std::llround(
                 static_cast<double>(n_customers) * validation_fraction))));

  const std::size_t strata = std::min<std::size_t>(10, n_customers);
  struct Stratum {
    std::size_t begin, end, take;
    double frac;
  };
  std::vector<Stratum> plan(strata);
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < strata; ++s) {
    plan[s].begin = s * n_customers / strata;
    plan[s].end = (s + 1) * n_customers / strata;
    const double exact = static_cast<double>(plan[s].end - plan[s].begin) *
                         static_cast<double>(total_val) /
                         static_cast<double>(n_customers);
    plan[s].take = static_cast<std::size_t>(exact);
    plan[s].frac = exact - static_cast<double>(plan[s].take);
    assigned += plan[s].take;
  }
  // largest-remainder distribution of the leftover validation slots
  std::vector<std::size_t> by_frac(strata);
  for (std::size_t s = 0; s < strata; ++s) by_frac[s] = s;
  std::stable_sort(by_frac.begin(), by_frac.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (plan[a].frac != plan[b].frac) {
                       return plan[a].frac > plan[b].frac;
                     }
                     return a < b;
                   });
  for (std::size_t idx = 0; assigned < total_val; ++idx) {
    auto& st = plan[by_frac[idx % strata]];
    if (st.take < st.end - st.begin) {
      ++st.take;
      ++assigned;
    }
  }

  // within each stratum the members stay sorted by count; validation takes
  // evenly spaced positions with a seeded offset, which keeps the two sides'
  // count distributions aligned even for heavy-tailed counts
  for (std::size_t s = 0; s < strata; ++s) {
    const std::size_t size = plan[s].end - plan[s].begin;
    const std::size_t take = plan[s].take;
    std::vector<std::uint8_t> to_val(size, 0);
    if (take > 0) {
      Rng rng(mix_seed(seed, 0x5712a, s));
      const double step = static_cast<double>(size) /
                          static_cast<double>(take);
      const double offset = rng.uniform() * step;
      for (std::size_t t = 0; t < take; ++t) {
        auto pos = static_cast<std::size_t>(offset +
                                            static_cast<double>(t) * step);
        pos = std::min(pos, size - 1);
        while (to_val[pos]) pos = (pos + 1) % size;  // rounding collisions
        to_val[pos] = 1;
      }
    }
    for (std::size_t i = 0; i < size; ++i) {
      const std::uint32_t member = order[plan[s].begin + i];
      if (to_val[i]) {
        split.customer_val.push_back(member);
      } else {
        split.customer_train.push_back(member);
      }
    }
  }
  // repair pass: greedy val/train swaps close any residual gap between the
  // two mean purchase counts (heavy-tailed top deciles need this)
  {
    auto& val = split.customer_val;
    auto& train = split.customer_train;
    const double n_v = static_cast<double>(val.size());
    const double n_t = static_cast<double>(train.size());
    auto mean_of = [&](const std::vector<std::uint32_t>& set) {
      double sum = 0.0;
      for (std::uint32_t j : set) sum += static_cast<double>(counts[j]);
      return sum / static_cast<double>(set.size());
    };
    for (int pass = 0; pass < 64; ++pass) {
      const double mv = mean_of(val);
      const double mt = mean_of(train);
      const double scale = std::max({mv, mt, 1e-12});
      const double gap = mv - mt;
      if (std::abs(gap) / scale < 0.01) break;
      // swapping val member v with train member t changes the gap by
      // (count_t - count_v) (1/n_v + 1/n_t); aim for the exact cancel
      const double want = -gap / (1.0 / n_v + 1.0 / n_t);
      double best_err = std::abs(gap);
      std::size_t best_v = val.size(), best_t = train.size();
      std::vector<std::size_t> train_order(train.size());
      for (std::size_t t = 0; t < train.size(); ++t) train_order[t] = t;
      std::stable_sort(train_order.begin(), train_order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return counts[train[a]] < counts[train[b]];
                       });
      for (std::size_t v = 0; v < val.size(); ++v) {
        const double target =
            static_cast<double>(counts[val[v]]) + want;
        const auto it = std::lower_bound(
            train_order.begin(), train_order.end(), target,
            [&](std::size_t t, double value) {
              return static_cast<double>(counts[train[t]]) < value;
            });
        auto consider = [&](std::vector<std::size_t>::const_iterator pos) {
          if (pos == train_order.end()) return;
          const double delta =
              static_cast<double>(counts[train[*pos]]) -
              static_cast<double>(counts[val[v]]);
          const double err =
              std::abs(gap + delta * (1.0 / n_v + 1.0 / n_t));
          if (err < best_err) {
            best_err = err;
            best_v = v;
            best_t = *pos;
          }
        };
        consider(it);
        if (it != train_order.begin()) consider(std::prev(it));
      }
      if (best_v == val.size()) break;  // no improving swap left
      std::swap(val[best_v], train[best_t]);
    }
  }

  std::sort(split.customer_val.begin(), split.customer_val.end());
  std::sort(split.customer_train.begin(), split.customer_train.end());

  split.rebuild_masks(matrix.n_items(), n_customers);
  return split;
}

std::span<const std::uint32_t> QuadrantView::items() const {
  const bool val = which == Quadrant::vt || which == Quadrant::vv;
  return val ? std::span<const std::uint32_t>(split->item_val)
             : std::span<const std::uint32_t>(split->item_train);
}

std::span<const std::uint32_t> QuadrantView::customers() const {
  const bool val = which == Quadrant::tv || which == Quadrant::vv;
  return val ? std::span<const std::uint32_t>(split->customer_val)
             : std::span<const std::uint32_t>(split->customer_train);
}

bool QuadrantView::contains_customer(std::uint32_t customer) const {
  const bool val = which == Quadrant::tv || which == Quadrant::vv;
  return static_cast<bool>(split->customer_is_val[customer]) == val;
}

std::size_t QuadrantView::count_entries() const {
  std::size_t count = 0;
  for_each_entry([&](std::uint32_t, std::uint32_t) { ++count; });
  return count;
}

QuadrantView quadrant(const PurchaseMatrix& matrix, const QuadrantSplit& split,
                      Quadrant which) {
  return QuadrantView{&matrix, &split, which};
}

}  // namespace fdna
