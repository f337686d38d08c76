#include "sclm/threads.hpp"

#include <atomic>
#include <cstdlib>

namespace sclm {

namespace {

int initial_threads() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("SCLM_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1 && cap < n) n = cap;
    }
    return n;
}

std::atomic<int> g_max_threads{initial_threads()};

}  // namespace

int max_threads() { return g_max_threads.load(std::memory_order_relaxed); }

void set_max_threads(int n) {
    g_max_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed);
}

}  // namespace sclm
