#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace qloss::app {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is handed out by
// index, so callers that write result[i] get completion-order independent
// output. The first exception thrown by any task is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1u), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < n; i = next++) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
                next = n;
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace qloss::app
