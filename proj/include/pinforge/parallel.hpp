#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace pinforge {

/// Runs body(begin, end) over contiguous chunks of [0, n) on worker
/// threads. Callers write only to disjoint per-index outputs, so results
/// never depend on the chunking.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_chunk = 1024)
{
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(hw, (n + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1));
    if (workers <= 1) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end)
            break;
        pool.emplace_back([&body, begin, end] { body(begin, end); });
    }
    for (auto& t : pool)
        t.join();
}

}  // namespace pinforge
