#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace nsm {

/// Number of worker threads used by parallel loops. Defaults to the
/// hardware concurrency, capped by the NSM_THREADS environment variable.
std::size_t worker_count();

/// Overrides the worker count for the rest of the process; 0 restores the default.
void set_worker_count(std::size_t n);

/// Calls fn(i) for every i in [begin, end). The range is split into contiguous
/// static chunks, so any per-index output is independent of the thread count.
template <class Fn>
void parallel_for(std::size_t begin, std::size_t end, Fn&& fn, std::size_t min_chunk = 1)
{
    if (end <= begin) return;
    const std::size_t n = end - begin;
    std::size_t workers = worker_count();
    if (min_chunk > 0) workers = std::min(workers, (n + min_chunk - 1) / min_chunk);
    if (workers <= 1) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace nsm
