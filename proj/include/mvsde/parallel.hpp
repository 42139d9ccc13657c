#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mvsde {

/// Runs body(i) for i in [0, count). Iterations must be independent; the
/// first exception thrown by any iteration is rethrown on the caller.
/// threads <= 0 uses the runtime default.
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto n = static_cast<std::ptrdiff_t>(count);
#ifdef _OPENMP
  const int workers = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(workers) if (workers > 1 && n > 32)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace mvsde
