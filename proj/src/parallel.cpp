#include "covw/parallel.hpp"

#include <atomic>

namespace covw {

namespace {
std::atomic<unsigned> g_threads{0};
}

void set_default_threads(unsigned n) { g_threads.store(n, std::memory_order_relaxed); }

unsigned default_threads() {
    const unsigned n = g_threads.load(std::memory_order_relaxed);
    if (n != 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

} // namespace covw
