#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

#include "riskscape/common.hpp"

namespace riskscape {

// Counter-based 64-bit generator (SplitMix64 step function). Output depends
// only on the evolving state, so streams keyed by (seed, ids...) are
// reproducible bit-for-bit and independent across keys. Gaussian variates use
// Box-Muller with a cached spare; both choices are fixed so generated
// datasets are bit-stable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1) with 53 random bits
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    bool bernoulli(double p) { return uniform01() < p; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * M_PI * u2;
        spare_ = mag * std::sin(ang);
        has_spare_ = true;
        return mag * std::cos(ang);
    }

    ParamVec normal_vector(Eigen::Index n) {
        ParamVec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    ParamVec unit_vector(Eigen::Index n) {
        ParamVec v = normal_vector(n);
        double nrm = v.norm();
        while (nrm == 0.0) {
            v = normal_vector(n);
            nrm = v.norm();
        }
        return v / nrm;
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Key-folding for independent substreams: each word is absorbed through the
// SplitMix64 mix, so (seed, a), (seed, a, b), ... give unrelated states.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> words) {
    Rng r(base);
    std::uint64_t s = r.next_u64();
    for (std::uint64_t w : words) {
        Rng m(s ^ (w + 0x9e3779b97f4a7c15ULL));
        s = m.next_u64();
    }
    return s;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a) { return derive_seed(base, {a}); }
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    return derive_seed(base, {a, b});
}
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return derive_seed(base, {a, b, c});
}

}  // namespace riskscape
