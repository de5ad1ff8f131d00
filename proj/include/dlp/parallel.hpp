#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace dlp {

// Static block partition of [0, n) across `threads` workers. Each index is
// processed exactly once and results are keyed by index, so output is
// independent of the thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (n == 0) return;
    if (threads < 1) threads = 1;
    const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    if (nt == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nt);
    const std::size_t chunk = (n + nt - 1) / nt;
    for (std::size_t t = 0; t < nt; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace dlp
