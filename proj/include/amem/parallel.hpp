#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace amem {

// Worker count: AMEM_THREADS caps it, hardware concurrency is the default.
inline unsigned worker_count(std::size_t jobs) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("AMEM_THREADS")) {
        unsigned cap = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
        if (cap >= 1 && cap < hw) hw = cap;
    }
    if (jobs < hw) hw = static_cast<unsigned>(jobs);
    return hw == 0 ? 1 : hw;
}

// Run fn(i) for i in [0, n). Each index writes only its own output slot, so
// results are independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    unsigned workers = worker_count(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace amem
