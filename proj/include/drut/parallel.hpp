#ifndef DRUT_PARALLEL_HPP
#define DRUT_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace drut {

inline int default_workers()
{
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run fn(i) for i in [0, n) on up to `workers` threads. Indices are handed
/// out dynamically; results must be written to per-index slots. The first
/// exception thrown by any task is rethrown on the caller's thread.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn)
{
    if (workers <= 0) {
        workers = default_workers();
    }
    const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (std::size_t t = 1; t < threads; ++t) {
        pool.emplace_back(body);
    }
    body();
    for (auto& th : pool) {
        th.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace drut

#endif
