#pragma once

#include <cstddef>
#include <functional>

namespace anchorloc {

// Number of worker threads used by ParallelFor. Defaults to the value of the
// ANCHORLOC_THREADS environment variable, else hardware concurrency.
int NumThreads();
void SetNumThreads(int n);

// Calls fn(i) for every i in [0, n). Work items must be independent; results
// are written by index so output never depends on scheduling.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace anchorloc
