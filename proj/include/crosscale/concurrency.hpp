#pragma once

// Deterministic data parallelism. Work splits into contiguous chunks that
// write disjoint output ranges, so results are identical for any thread
// count. The process-wide cap is set once by the CLI (--threads).

#include <atomic>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace crosscale {

namespace detail {
inline std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{0};  // 0 = hardware concurrency
    return cap;
}
}  // namespace detail

inline void set_max_threads(int n) { detail::thread_cap().store(n < 0 ? 0 : n); }

inline int max_threads() {
    int cap = detail::thread_cap().load();
    if (cap <= 0) {
        unsigned hw = std::thread::hardware_concurrency();
        cap = hw == 0 ? 1 : static_cast<int>(hw);
    }
    return cap;
}

/// Runs fn(begin, end) over a partition of [0, n). Chunks never overlap and
/// fn must only write state owned by its range.
template <typename Fn>
void parallel_chunks(std::int64_t n, Fn&& fn) {
    if (n <= 0) return;
    const int threads = max_threads();
    if (threads <= 1 || n == 1) {
        fn(std::int64_t{0}, n);
        return;
    }
    const std::int64_t chunks = std::min<std::int64_t>(threads, n);
    const std::int64_t per = n / chunks;
    const std::int64_t extra = n % chunks;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(chunks));
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    std::int64_t begin = 0;
    for (std::int64_t i = 0; i < chunks; ++i) {
        const std::int64_t end = begin + per + (i < extra ? 1 : 0);
        workers.emplace_back([&, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                if (!failed.exchange(true)) first_error = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace crosscale
