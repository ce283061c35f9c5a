#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace rawden {

// Runs fn(chunk) for chunk = 0..n_chunks-1 on up to `workers` threads.
// The chunk decomposition is fixed by the caller, never by the worker
// count, so code that writes per-chunk results and reduces them in chunk
// order produces identical output for any number of workers.
inline void parallel_chunks(int n_chunks, int workers, const std::function<void(int)>& fn)
{
    if (workers <= 1 || n_chunks <= 1) {
        for (int c = 0; c < n_chunks; ++c)
            fn(c);
        return;
    }

    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto body = [&]() {
        while (!failed.load(std::memory_order_relaxed)) {
            const int c = next.fetch_add(1);
            if (c >= n_chunks)
                break;
            try {
                fn(c);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                failed = true;
            }
        }
    };

    const int n_threads = std::min(workers, n_chunks);
    std::vector<std::thread> pool;
    pool.reserve(n_threads - 1);
    for (int t = 1; t < n_threads; ++t)
        pool.emplace_back(body);
    body();
    for (auto& th : pool)
        th.join();

    if (error)
        std::rethrow_exception(error);
}

inline int resolve_workers(int requested)
{
    if (requested > 0)
        return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace rawden
