#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace iterint {

/// Worker count: ITERINT_THREADS if set, else hardware concurrency.
inline int default_threads() {
    if (const char* env = std::getenv("ITERINT_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

inline int& thread_setting() {
    static int n = 0;
    return n;
}

inline void set_threads(int n) { thread_setting() = n; }

inline int threads() { return thread_setting() > 0 ? thread_setting() : default_threads(); }

/// Run body(i) for i in [0,n) over contiguous chunks. Results must be written
/// to per-index slots by the caller; reductions happen afterwards in index
/// order so the outcome does not depend on the worker count.
template <class F>
void parallel_for(std::size_t n, F&& body, int nthreads = 0) {
    if (nthreads <= 0) nthreads = threads();
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(nthreads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr err;
    std::mutex m;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(m);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace iterint
