#pragma once

#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ogl {

// Worker-count resolution: an explicit request wins, then the
// GREEDY_DICT_WORKERS environment variable, then the hardware.
inline std::size_t resolve_workers(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("GREEDY_DICT_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
        throw std::invalid_argument("GREEDY_DICT_WORKERS must be a positive integer");
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// Runs body(i) for i in [0, n) on up to `workers` threads.  Each index is
// claimed exactly once; callers write results into per-index slots, so the
// outcome is identical for any worker count.  The first exception thrown by
// any body is rethrown on the calling thread after all workers finish.
template <typename Body>
void parallel_for(std::size_t n, std::size_t workers, Body&& body) {
    if (n == 0) return;
    const std::size_t threads = std::min(workers == 0 ? std::size_t{1} : workers, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace ogl
