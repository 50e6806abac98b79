#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace tailnet {

/// Worker count: hardware concurrency, capped by TAILNET_THREADS when set.
inline unsigned default_worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("TAILNET_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
        } catch (const std::exception&) {
        }
    }
    return n;
}

/// Runs body(block_index) for every block on `workers` threads. Blocks are
/// dealt round-robin; callers write results into per-block slots and reduce
/// them in block order, so output does not depend on the worker count.
template <typename Body>
void for_each_block(std::size_t n_blocks, unsigned workers, Body&& body) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n_blocks, 1))));
    if (workers == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) body(b);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t b = w; b < n_blocks; b += workers) body(b);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace tailnet
