#pragma once

#include <cstddef>
#include <functional>

namespace nqad {

/// Global worker count for parallel_for. Defaults to the logical core count.
int thread_count();
void set_thread_count(int n);

/// Runs fn(i) for every i in [0, n) and blocks until done. Work is split
/// into contiguous blocks; results must not depend on execution order.
/// Nested calls run sequentially on the calling thread.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace nqad
