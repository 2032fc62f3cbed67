#pragma once

#include <cstddef>
#include <functional>

namespace mfrl {

// Worker count: MFRL_THREADS if set (>= 1), else hardware concurrency.
int worker_count();

// Runs body(i) for i in [0, n) on up to worker_count() threads. Callers
// write results into slot i, so output order never depends on scheduling.
// The first exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mfrl
