#include "nsm/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>

namespace nsm {

namespace {
std::atomic<std::size_t> g_override{0};

std::size_t default_workers()
{
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("NSM_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
        } catch (...) {
            // malformed value: ignore the cap
        }
    }
    return n;
}
} // namespace

std::size_t worker_count()
{
    const std::size_t o = g_override.load();
    return o > 0 ? o : default_workers();
}

void set_worker_count(std::size_t n) { g_override.store(n); }

} // namespace nsm
