#pragma once

#include <cstdint>
#include <thread>
#include <vector>

namespace sclm {

// Worker cap. Defaults to hardware_concurrency, clamped by the SCLM_THREADS
// environment variable. Work is always split into contiguous index ranges,
// so results are bitwise identical to a sequential run.
int max_threads();
void set_max_threads(int n);

template <typename F>
void parallel_for(int64_t begin, int64_t end, int threads, F&& fn) {
    const int64_t count = end - begin;
    if (count <= 0) return;
    if (threads > count) threads = static_cast<int>(count);
    if (threads <= 1) {
        for (int64_t i = begin; i < end; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const int64_t chunk = (count + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const int64_t lo = begin + t * chunk;
        const int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace sclm
