#pragma once

/**
 * @file parallel.hpp
 *
 * @brief Index-ordered parallel map. Results land in slot i regardless of which
 * worker ran item i, so reductions over the output are schedule-independent.
 */

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <type_traits>
#include <vector>

namespace hsbench {

/// Hardware concurrency, at least 1.
inline unsigned default_jobs() {
    return std::max(1u, std::thread::hardware_concurrency());
}

/**
 * Evaluates fn(0) ... fn(n - 1) on up to `jobs` threads. If any call throws, the
 * exception from the lowest failing index is rethrown after all workers finish.
 */
template <class Fn>
auto parallel_map(std::size_t n, unsigned jobs, Fn&& fn) -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
    using R = std::invoke_result_t<Fn&, std::size_t>;
    std::vector<R> out(n);
    std::vector<std::exception_ptr> errors(n);
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), n));

    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

} // namespace hsbench
