#pragma once

#include <cstddef>
#include <functional>

namespace robustmm {

/// Worker count: `requested` if positive, else ROBUSTMM_THREADS if set and
/// positive, else std::thread::hardware_concurrency().
int resolve_threads(int requested = 0);

/// Runs body(i) for i in [0, count). Work is handed out by index, so results
/// written to per-index slots do not depend on the thread count. If any call
/// throws, the exception from the smallest failing index is rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace robustmm
