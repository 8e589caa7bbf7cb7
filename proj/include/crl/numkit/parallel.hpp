#pragma once

#include <cstddef>
#include <functional>

namespace crl::nk {

// Process-wide worker count used by parallel_for; 0 means hardware concurrency.
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs fn(i) for i in [0, n) over contiguous chunks. Callers write results by
// index, so output never depends on scheduling. The first exception thrown by
// any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace crl::nk
