#pragma once

#include <cstddef>
#include <functional>

namespace clade {

// Worker count: CLADE_THREADS if set (>= 1), else hardware concurrency.
std::size_t thread_count();

// Runs fn(i) for i in [0, n) on up to thread_count() threads. Each index runs
// exactly once; the first exception thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace clade
