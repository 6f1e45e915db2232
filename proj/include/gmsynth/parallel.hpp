#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gmsynth {

/// Worker count: GMSYNTH_THREADS if set, otherwise the hardware concurrency.
std::size_t worker_count();

namespace detail {
/// Set on threads executing a parallel_for body; nested loops then run inline.
inline thread_local bool in_parallel_region = false;
}  // namespace detail

/// Calls f(i) for i in [0, n) on a bounded pool. Results must be written to
/// per-index slots; the first exception (by index) is rethrown.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    const std::size_t workers = detail::in_parallel_region ? 1 : std::min(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr err;
    std::size_t err_index = n;
    auto run = [&] {
        detail::in_parallel_region = true;
        struct Reset {
            ~Reset() { detail::in_parallel_region = false; }
        } reset;
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (i < err_index) {
                    err_index = i;
                    err = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace gmsynth
