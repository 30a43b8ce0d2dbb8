#pragma once

#include <cstddef>
#include <functional>

namespace igbo {

// Worker count: IGBO_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous blocks; callers
// write results into slot i and reduce in index order afterwards, so the
// outcome does not depend on the worker count. The first exception thrown by
// any task is rethrown on the calling thread. Calls made from inside a worker
// run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace igbo
