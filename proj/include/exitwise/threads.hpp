#pragma once

#include <cstddef>
#include <functional>

namespace exitwise {

// Worker cap: EXITWISE_THREADS when set (minimum 1), else hardware
// concurrency.
std::size_t worker_limit();

// Runs fn(i) for i in [0, n). Results must be written to per-index slots;
// chunk boundaries are fixed by n alone, so output never depends on the
// worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace exitwise
