// Minimal deterministic parallel-for.  Work is split into fixed contiguous
// chunks so the assignment of indices to threads never depends on timing;
// callers write to disjoint slots, which keeps results bit-identical for any
// thread count.
#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace cidra {

// Resolve a requested thread count: explicit argument wins, then the
// CIDRA_THREADS environment variable, then hardware concurrency.
inline int resolve_threads(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("CIDRA_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

// Invoke fn(i) for i in [begin, end) across `threads` workers.  Chunk
// boundaries are a pure function of (begin, end, threads).
inline void parallel_for(long begin, long end, int threads,
                         const std::function<void(long)>& fn) {
    const long n = end - begin;
    if (n <= 0) return;
    threads = static_cast<int>(std::max<long>(1, std::min<long>(threads, n)));
    if (threads == 1) {
        for (long i = begin; i < end; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const long chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const long lo = begin + t * chunk;
        const long hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (long i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace cidra
