#pragma once

/// @file parallel.hpp
/// @brief Minimal fork-join loop over independent jobs.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace viscomem {

/// Runs job(i) for i in [0, n) on up to `threads` workers.
template <class Job>
void parallel_for(std::size_t n, std::size_t threads, const Job& job) {
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) job(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace viscomem
