#include "riskscape/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

namespace riskscape {

namespace {

int initial_threads() {
    if (const char* env = std::getenv("RISKSCAPE_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

std::atomic<int> g_max_threads{0};

}  // namespace

int max_threads() {
    int n = g_max_threads.load(std::memory_order_relaxed);
    if (n == 0) {
        n = initial_threads();
        g_max_threads.store(n, std::memory_order_relaxed);
    }
    return n;
}

void set_max_threads(int n) { g_max_threads.store(std::max(1, n), std::memory_order_relaxed); }

BlockPlan make_block_plan(std::size_t n, std::size_t target_block, std::size_t max_blocks) {
    BlockPlan plan;
    plan.n = n;
    if (n == 0) return plan;
    target_block = std::max<std::size_t>(1, target_block);
    std::size_t nblocks = (n + target_block - 1) / target_block;
    nblocks = std::min(std::max<std::size_t>(1, nblocks), std::max<std::size_t>(1, max_blocks));
    plan.nblocks = nblocks;
    plan.block_size = (n + nblocks - 1) / nblocks;
    return plan;
}

}  // namespace riskscape
