#pragma once

#include <cstddef>
#include <functional>

namespace censuslab {

// Resolves a worker-count request: <= 0 means "use the hardware", anything
// else is taken as-is.
int effective_workers(int requested);

// Runs fn(0..n-1) on up to `workers` threads. Work is assigned by index, so
// callers that write results into slot i of a pre-sized vector get identical
// output regardless of the worker count. The first exception thrown by any
// worker is rethrown on the calling thread after all workers join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace censuslab
