#pragma once

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace enscond {

// Resolve the worker count: explicit request > ENSCOND_THREADS > 1.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("ENSCOND_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

// Run fn(chunk_index) for chunk_index in [0, chunks). Work is striped over
// the workers by index, so which thread runs a chunk never affects what the
// chunk computes; callers reduce per-chunk results in chunk order. The first
// worker exception is rethrown after the pool joins.
template <class Fn>
void parallel_chunks(std::uint64_t chunks, int threads, Fn&& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || chunks <= 1) {
        for (std::uint64_t c = 0; c < chunks; ++c) fn(c);
        return;
    }
    const int workers = int(std::min<std::uint64_t>(std::uint64_t(threads), chunks));
    std::vector<std::thread> pool;
    pool.reserve(size_t(workers));
    std::exception_ptr error;
    std::mutex error_mu;
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (std::uint64_t c = std::uint64_t(t); c < chunks; c += std::uint64_t(workers))
                    fn(c);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace enscond
