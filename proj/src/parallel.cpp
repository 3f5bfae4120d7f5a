#include "fdna/parallel.hpp"

namespace fdna::par {

namespace {
int g_thread_cap = 0;
}

void set_threads(int n) { g_thread_cap = n < 0 ? 0 : n; }

int thread_cap() { return g_thread_cap; }

int resolved_threads() {
#ifdef _OPENMP
  const int max = omp_get_max_threads();
  return g_thread_cap == 0 ? max : std::min(g_thread_cap, max);
#else
  return 1;
#endif
}

}  // namespace fdna::par
