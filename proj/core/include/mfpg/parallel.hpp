#pragma once

#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace mfpg {

// Worker cap: MFPG_THREADS if set, otherwise hardware concurrency.
inline std::size_t max_threads() {
    if (const char* env = std::getenv("MFPG_THREADS")) {
        long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<std::size_t>(n);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

// Runs fn(i) for i in [0, n). Each index is processed exactly once and
// writes only its own outputs, so results do not depend on the worker
// count. Reductions must be done by the caller over stored per-index
// results in index order.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
    std::size_t workers = std::min(max_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace mfpg
