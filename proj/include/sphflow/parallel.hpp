#pragma once

// Thread-count-invariant parallel loops. Work is partitioned into fixed
// chunks whose boundaries never depend on the number of threads, and every
// reduction combines chunk results in a fixed pairwise order.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace sphflow::parallel {

namespace detail {
inline std::atomic<unsigned>& thread_setting()
{
    static std::atomic<unsigned> n{0};
    return n;
}
}  // namespace detail

/// Caps the worker count; 0 restores the default (hardware concurrency).
inline void set_threads(unsigned n) { detail::thread_setting().store(n); }

inline unsigned threads()
{
    unsigned n = detail::thread_setting().load();
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

/// Calls fn(chunk_begin, chunk_end) over [begin, end) split into chunks of
/// `grain` items. Chunks are claimed dynamically but each chunk is processed
/// by exactly one thread, so results only depend on per-chunk writes.
template <typename Fn>
void for_chunks(std::size_t begin, std::size_t end, std::size_t grain, Fn&& fn)
{
    if (end <= begin) return;
    grain = std::max<std::size_t>(grain, 1);
    const std::size_t chunks = (end - begin + grain - 1) / grain;
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads(), chunks));
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) {
            const std::size_t lo = begin + c * grain;
            fn(lo, std::min(end, lo + grain));
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            const std::size_t lo = begin + c * grain;
            try {
                fn(lo, std::min(end, lo + grain));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(chunks);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

/// Per-item loop; fn(i).
template <typename Fn>
void for_each_index(std::size_t begin, std::size_t end, std::size_t grain, Fn&& fn)
{
    for_chunks(begin, end, grain, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
}

/// Sums `parts` in a fixed balanced binary tree (in place; result in parts[0]).
inline Eigen::VectorXd pairwise_sum(std::vector<Eigen::VectorXd>& parts)
{
    if (parts.empty()) return {};
    for (std::size_t stride = 1; stride < parts.size(); stride *= 2) {
        for (std::size_t i = 0; i + stride < parts.size(); i += 2 * stride) parts[i] += parts[i + stride];
    }
    return parts[0];
}

}  // namespace sphflow::parallel
