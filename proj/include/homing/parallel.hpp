#pragma once

#include <cstddef>
#include <functional>

namespace homing {

/// Worker count used by parallel_for. Defaults to HOMING_BENCH_THREADS, else 1.
int thread_count();
void set_thread_count(int n);

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks write disjoint
/// output, so results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace homing
