#pragma once

#include <cstddef>
#include <functional>

namespace ierf {

// Worker count from IERF_WORKERS, defaulting to the hardware concurrency.
std::size_t worker_count();

// Runs fn(0..n-1) on up to `workers` threads (0 means worker_count()).
// Each index must write only to its own slot. The exception from the lowest
// failing index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t workers = 0);

}  // namespace ierf
