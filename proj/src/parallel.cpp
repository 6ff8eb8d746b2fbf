#include "nqad/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace nqad {

namespace {
std::atomic<int> g_threads{0};
thread_local bool t_inside_parallel = false;
}  // namespace

int thread_count() {
    int n = g_threads.load(std::memory_order_relaxed);
    if (n > 0) return n;
    n = static_cast<int>(std::thread::hardware_concurrency());
    return n > 0 ? n : 1;
}

void set_thread_count(int n) { g_threads.store(n > 0 ? n : 0, std::memory_order_relaxed); }

void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    if (n == 0) return;
    const size_t workers = std::min<size_t>(static_cast<size_t>(thread_count()), n);
    if (workers <= 1 || t_inside_parallel) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const size_t chunk = (n + workers - 1) / workers;
    for (size_t w = 0; w < workers; ++w) {
        const size_t lo = w * chunk;
        const size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            t_inside_parallel = true;
            for (size_t i = lo; i < hi; ++i) fn(i);
            t_inside_parallel = false;
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace nqad
