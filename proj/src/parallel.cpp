// Copyright (C) 2026 gvrlab authors
// SPDX-License-Identifier: Apache-2.0
#include "gvr/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

#if defined(__linux__)
#include <sched.h>
#endif

namespace gvr {

static std::atomic<int> g_workers{0};

void set_workers(int n) { g_workers.store(n < 0 ? 0 : n); }

int workers() {
    int n = g_workers.load();
    if (n == 0) {
#if defined(__linux__)
        // hardware_concurrency() reports physical cores even inside a CPU-
        // restricted cgroup; the affinity mask is what we may actually use.
        cpu_set_t set;
        if (sched_getaffinity(0, sizeof set, &set) == 0) {
            int avail = CPU_COUNT(&set);
            if (avail > 0) return std::min(avail, 8);
        }
#endif
        unsigned hw = std::thread::hardware_concurrency();
        n = hw ? static_cast<int>(std::min(hw, 8u)) : 1;
    }
    return n;
}

void parallel_for_chunks(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    int w = workers();
    if (w <= 1 || n < 2) {
        fn(0, n);
        return;
    }
    int64_t nthreads = std::min<int64_t>(w, n);
    int64_t chunk = (n + nthreads - 1) / nthreads;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nthreads));
    for (int64_t t = 0; t < nthreads; ++t) {
        int64_t lo = t * chunk;
        int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
    parallel_for_chunks(n, [&fn](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) fn(i);
    });
}

}  // namespace gvr
