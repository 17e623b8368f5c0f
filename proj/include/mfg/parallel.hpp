#pragma once

#include <atomic>
#include <exception>
#include <limits>

namespace mfg {

// Static-schedule parallel loop. Each index writes only its own outputs, so
// results do not depend on the thread count. If bodies throw, the exception
// from the smallest failing index is rethrown after the loop.
template <typename Body>
void parallel_for(int count, Body&& body) {
  std::exception_ptr error = nullptr;
  int error_index = std::numeric_limits<int>::max();
  std::atomic<bool> failed{false};
#pragma omp parallel for schedule(static)
  for (int i = 0; i < count; ++i) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      body(i);
    } catch (...) {
#pragma omp critical(mfg_parallel_for_error)
      {
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
      failed.store(true, std::memory_order_relaxed);
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace mfg
