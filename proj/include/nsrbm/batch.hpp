#pragma once

// Deterministic batch replication: trial i always runs on stream
// (seed, i), so the result multiset is invariant to the worker count and
// results land in trial order.

#include <cstdint>
#include <thread>
#include <vector>

#include "random.hpp"

namespace nsrbm {

template <class F>
inline void run_batch(std::size_t n_trials, unsigned workers, std::uint64_t seed, F&& fn) {
    if (workers <= 1 || n_trials < 2) {
        for (std::size_t i = 0; i < n_trials; ++i) {
            RandomStream st(seed, i);
            fn(i, st);
        }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::size_t i = w; i < n_trials; i += workers) {
                RandomStream st(seed, i);
                fn(i, st);
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace nsrbm
