#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fdna::par {

// Global worker cap. 0 means "use the OpenMP default". Thread count never
// changes results: loops parallelize over independent output elements, and
// scalar reductions always use the fixed chunk decomposition below.
void set_threads(int n);
int thread_cap();
int resolved_threads();

// Fixed chunk count for deterministic reductions. A sum over n values is
// always accumulated as min(kReduceChunks, n) ascending-index partial sums
// that are then added in ascending chunk order, so the result depends only
// on n, never on the thread count. Serial reference code reproduces the
// same order (see fdna::ref).
inline constexpr std::size_t kReduceChunks = 64;

inline std::size_t chunk_count(std::size_t n) {
  return std::min<std::size_t>(kReduceChunks, n ? n : 1);
}

template <class F>
void for_each(std::size_t n, F&& body) {
#ifdef _OPENMP
  if (resolved_threads() > 1 && n > 1) {
    // exceptions may not unwind out of a parallel region: capture the first
    // one and rethrow after the join
    std::exception_ptr error = nullptr;
#pragma omp parallel for schedule(static) num_threads(resolved_threads())
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(fdna_par_error)
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) body(i);
}

// body(chunk_index, begin, end); chunk bounds depend only on n
template <class F>
void for_chunks(std::size_t n, F&& body) {
  const std::size_t nc = chunk_count(n);
#ifdef _OPENMP
  if (resolved_threads() > 1 && nc > 1) {
    std::exception_ptr error = nullptr;
#pragma omp parallel for schedule(static) num_threads(resolved_threads())
    for (long long c = 0; c < static_cast<long long>(nc); ++c) {
      try {
        const std::size_t b = static_cast<std::size_t>(c) * n / nc;
        const std::size_t e = (static_cast<std::size_t>(c) + 1) * n / nc;
        body(static_cast<std::size_t>(c), b, e);
      } catch (...) {
#pragma omp critical(fdna_par_error)
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
    return;
  }
#endif
  for (std::size_t c = 0; c < nc; ++c) {
    body(c, c * n / nc, (c + 1) * n / nc);
  }
}

// Deterministic parallel sum of value(i) over [0, n).
template <class F>
double sum(std::size_t n, F&& value) {
  if (n == 0) return 0.0;
  std::vector<double> partial(chunk_count(n), 0.0);
  for_chunks(n, [&](std::size_t c, std::size_t b, std::size_t e) {
    double acc = 0.0;
    for (std::size_t i = b; i < e; ++i) acc += value(i);
    partial[c] = acc;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace fdna::par
