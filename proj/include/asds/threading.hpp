#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "asds/common.hpp"

namespace asds {

/// Worker cap, read once per call from ASDS_THREADS. Unset or invalid
/// values fall back to 1 so default runs are single-threaded and
/// reproducible ordering never depends on scheduling.
inline unsigned thread_budget() {
    const char* raw = std::getenv("ASDS_THREADS");
    if (raw == nullptr) return 1;
    char* end = nullptr;
    const long parsed = std::strtol(raw, &end, 10);
    if (end == raw || *end != '\0' || parsed < 1) return 1;
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<long>(parsed, hw));
}

/// Runs body(i) for i in [0, n). Work is split into contiguous blocks;
/// each index is processed exactly once and bodies must only write to
/// slots owned by their index.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
    const unsigned workers = thread_budget();
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const std::size_t block = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = std::size_t(w) * block;
        if (lo >= n) break;
        const std::size_t hi = std::min(n, lo + block);
        pool.emplace_back([&body, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace asds
