#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fdna {

// Sparse boolean customer x item incidence matrix, stored item-major
// (compressed sparse rows keyed by item) because training iterates one
// item's full customer row per loss term.
struct PurchaseMatrix {
  std::vector<std::string> item_ids;
  std::vector<std::string> customer_ids;
  std::vector<std::size_t> row_ptr;   // item_ids.size() + 1
  std::vector<std::uint32_t> col;     // customer indices, ascending per row

  std::size_t n_items() const { return item_ids.size(); }
  std::size_t n_customers() const { return customer_ids.size(); }
  std::size_t n_entries() const { return col.size(); }
  std::span<const std::uint32_t> row(std::size_t item) const;
  bool has(std::size_t item, std::size_t customer) const;
  double density() const;
  std::vector<std::size_t> customer_counts() const;  // purchases per customer
};

struct LoadStats {
  std::size_t lines = 0;
  std::size_t duplicates = 0;
  std::size_t entries = 0;
};

// Lines "customer_id,item_id". Duplicates collapse to one entry; unknown ids
// raise data_error naming the offending record.
PurchaseMatrix load_purchases(std::istream& in,
                              const std::vector<std::string>& item_order,
                              const std::vector<std::string>& customer_order,
                              LoadStats* stats = nullptr);

// Convenience: customer order = sorted unique customer ids in the stream.
PurchaseMatrix load_purchases_file(const std::string& path,
                                   const std::vector<std::string>& item_order,
                                   LoadStats* stats = nullptr);

// Build a matrix directly from index pairs (deduplicated).
PurchaseMatrix make_matrix(std::vector<std::string> item_ids,
                           std::vector<std::string> customer_ids,
                           std::vector<std::pair<std::uint32_t,
                                                 std::uint32_t>> entries);

enum class Quadrant { tt, vt, tv, vv };

const char* quadrant_name(Quadrant q);
Quadrant quadrant_from_name(const std::string& name);

struct QuadrantSplit {
  std::vector<std::uint32_t> item_train, item_val;          // ascending
  std::vector<std::uint32_t> customer_train, customer_val;  // ascending
  std::vector<std::uint8_t> item_is_val;      // size n_items
  std::vector<std::uint8_t> customer_is_val;  // size n_customers
  void rebuild_masks(std::size_t n_items, std::size_t n_customers);
};

// Frequency-aligned customer split: customers sorted by purchase count are
// stratified into count deciles; inside each decile the validation side
// takes evenly spaced count quantiles (seeded offset), so the purchase-count
// distributions of the two sides align. The item split is taken as given
// (validation item ids).
QuadrantSplit split_customers(const PurchaseMatrix& matrix,
                              const std::vector<std::string>& item_val_ids,
                              double validation_fraction, std::uint64_t seed);

struct QuadrantView {
  const PurchaseMatrix* matrix = nullptr;
  const QuadrantSplit* split = nullptr;
  Quadrant which = Quadrant::tt;

  std::span<const std::uint32_t> items() const;
  std::span<const std::uint32_t> customers() const;
  bool contains_customer(std::uint32_t customer) const;
  std::size_t count_entries() const;

  template <class F>
  void for_each_entry(F&& fn) const {  // fn(item, customer)
    for (std::uint32_t i : items()) {
      for (std::uint32_t j : matrix->row(i)) {
        if (contains_customer(j)) fn(i, j);
      }
    }
  }
};

QuadrantView quadrant(const PurchaseMatrix& matrix, const QuadrantSplit& split,
                      Quadrant which);

}  // namespace fdna
