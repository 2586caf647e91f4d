#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace gradforge {

/// Worker cap from GRADFORGE_THREADS; 0 or unset means one per hardware
/// thread. Anything unparseable falls back to auto.
inline std::size_t thread_budget() {
    std::size_t n = 0;
    if (const char* env = std::getenv("GRADFORGE_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end && *end == '\0') n = static_cast<std::size_t>(v);
    }
    if (n == 0) n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

/// Runs fn(begin, end) over contiguous chunks of [0, n). fn must write only
/// to disjoint locations per index; chunking is by thread, so results must
/// not depend on chunk boundaries.
inline void parallel_chunks(std::size_t n,
                            const std::function<void(std::size_t, std::size_t)>& fn) {
    const std::size_t workers = std::min(thread_budget(), n == 0 ? std::size_t{1} : n);
    if (workers <= 1 || n < 2) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

} // namespace gradforge
