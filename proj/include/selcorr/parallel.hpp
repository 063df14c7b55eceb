#pragma once

#include <atomic>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace selcorr {

// Global cap on OpenMP workers. 0 means "use the runtime default".
// Every parallel_for body writes to its own output slot, so results are
// identical for any cap, including the serial reference path (cap = 1).
inline std::atomic<int>& thread_cap_storage() {
  static std::atomic<int> cap{0};
  return cap;
}

inline void set_thread_cap(int cap) { thread_cap_storage().store(cap < 0 ? 0 : cap); }

inline int effective_threads() {
#ifdef _OPENMP
  const int cap = thread_cap_storage().load();
  const int hw = omp_get_max_threads();
  return cap > 0 ? (cap < hw ? cap : hw) : hw;
#else
  return 1;
#endif
}

// Data-parallel loop over [0, n). Runs serially when inside an existing
// parallel region (no nesting), when the cap is 1, or without OpenMP.
template <class F>
void parallel_for(std::size_t n, F&& body) {
#ifdef _OPENMP
  if (!omp_in_parallel() && effective_threads() > 1 && n > 1) {
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) num_threads(effective_threads())
    for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) body(i);
}

// Serial reference loop, kept as an explicit alternative for tests and benchmarks.
template <class F>
void serial_for(std::size_t n, F&& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace selcorr
