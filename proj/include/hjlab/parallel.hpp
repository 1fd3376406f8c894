#pragma once

#include <cstddef>
#include <functional>

namespace hjlab {

/// Number of worker threads: $HJLAB_WORKERS if set and positive, otherwise
/// std::thread::hardware_concurrency() (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to `workers` threads. Indices are handed
/// out dynamically; body must only write to per-index state. The first
/// exception thrown by any body is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body);

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  parallel_for(n, worker_count(), body);
}

}  // namespace hjlab
