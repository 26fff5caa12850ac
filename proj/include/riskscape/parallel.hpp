#pragma once

#include <cstddef>
#include <vector>

#include "riskscape/common.hpp"

namespace riskscape {

// Global worker count for parallel kernels and sweeps. Initialized from the
// RISKSCAPE_THREADS environment variable (when set) or the hardware count;
// set_max_threads overrides both.
int max_threads();
void set_max_threads(int n);

// Fixed partition of [0, n) into contiguous blocks. The partition depends only
// on (n, max_blocks), never on the worker count, so reductions that sum block
// partials in index order give identical results at any thread count.
struct BlockPlan {
    std::size_t n = 0;
    std::size_t nblocks = 1;
    std::size_t block_size = 0;

    std::size_t begin(std::size_t b) const { return b * block_size; }
    std::size_t end(std::size_t b) const {
        const std::size_t e = (b + 1) * block_size;
        return e < n ? e : n;
    }
};

BlockPlan make_block_plan(std::size_t n, std::size_t target_block = 1024, std::size_t max_blocks = 256);

// Ordered blocked reduction: partials[b] = fn(begin_b, end_b) computed in
// parallel, then accumulated serially in block order. T needs operator+=.
template <class T, class Fn>
T blocked_reduce(const BlockPlan& plan, const T& zero, Fn&& fn) {
    if (plan.n == 0) return zero;
    if (plan.nblocks == 1) {
        T acc = zero;
        acc += fn(std::size_t{0}, plan.n);
        return acc;
    }
    std::vector<T> partials(plan.nblocks, zero);
    const long nb = static_cast<long>(plan.nblocks);
#pragma omp parallel for schedule(static) num_threads(max_threads())
    for (long b = 0; b < nb; ++b) {
        const auto ub = static_cast<std::size_t>(b);
        partials[ub] = fn(plan.begin(ub), plan.end(ub));
    }
    T acc = zero;
    for (std::size_t b = 0; b < plan.nblocks; ++b) acc += partials[b];
    return acc;
}

// Parallel loop over independent jobs writing to preassigned slots; results
// are deterministic because job i owns slot i.
template <class Fn>
void parallel_jobs(std::size_t njobs, Fn&& fn) {
    const long n = static_cast<long>(njobs);
#pragma omp parallel for schedule(dynamic, 1) num_threads(max_threads())
    for (long i = 0; i < n; ++i) fn(static_cast<std::size_t>(i));
}

}  // namespace riskscape
