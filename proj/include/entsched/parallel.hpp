#pragma once

#include "entsched/config.hpp"

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace entsched {

/// Index-grabbing parallel loop over [0, count). Work items must be
/// independent; results keyed by index stay deterministic.
inline void parallel_for(long count, const std::function<void(long)>& body) {
    const int workers = static_cast<int>(std::min<long>(thread_budget(), count));
    if (workers <= 1) {
        for (long k = 0; k < count; ++k)
            body(k);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (long k = next.fetch_add(1); k < count; k = next.fetch_add(1))
                body(k);
        });
    for (auto& t : pool)
        t.join();
}

} // namespace entsched
