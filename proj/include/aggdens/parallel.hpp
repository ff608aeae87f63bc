#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace aggdens {

// Runs fn(i) for i in [0, count) on `threads` workers. Work items own their
// output slots, so results are identical at any thread count.
inline void parallel_for_index(int count, int threads,
                               const std::function<void(int)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int nt = std::min(threads, count);
    pool.reserve(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

// Worker count from the AGG_DENSITY_THREADS environment variable; defaults
// to single-threaded execution.
inline int env_thread_count() {
    const char* v = std::getenv("AGG_DENSITY_THREADS");
    if (!v) return 1;
    const int n = std::atoi(v);
    return n >= 1 ? n : 1;
}

}  // namespace aggdens
