// Times the blocked OpenMP kernels against the serial reference path for the
// three families at a few problem sizes, printing a speedup table.

#include <chrono>
#include <cstdio>
#include <functional>

#include "riskscape/datagen.hpp"
#include "riskscape/models.hpp"
#include "riskscape/parallel.hpp"
#include "riskscape/rng.hpp"

using namespace riskscape;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void bench_family(Family family, Eigen::Index n, Eigen::Index d, int reps) {
    GenConfig g;
    g.family = family;
    g.n = n;
    g.d = d;
    g.seed = 42;
    ModelSpec spec;
    spec.family = family;
    Dataset data;
    switch (family) {
        case Family::classification: data = gen_classification(g).first; break;
        case Family::robust_regression: data = gen_regression(g).first; break;
        case Family::gmm2: data = gen_gmm2(g).data; break;
    }
    Rng rng(7);
    const ParamVec theta = 0.3 * rng.normal_vector(spec.param_dim(d));

    struct Row {
        const char* op;
        std::function<void()> par;
        std::function<void()> ser;
    } rows[] = {
        {"risk", [&] { (void)risk(spec, data, theta); }, [&] { (void)ref::risk(spec, data, theta); }},
        {"gradient", [&] { (void)gradient(spec, data, theta); },
         [&] { (void)ref::gradient(spec, data, theta); }},
        {"hessian", [&] { (void)hessian(spec, data, theta); },
         [&] { (void)ref::hessian(spec, data, theta); }},
    };
    for (const auto& row : rows) {
        const double tp = time_ms(row.par, reps);
        const double ts = time_ms(row.ser, reps);
        std::printf("%-18s %-9s n=%-7ld d=%-5ld parallel %9.3f ms   serial %9.3f ms   speedup %5.2fx\n",
                    family_name(family).c_str(), row.op, static_cast<long>(n), static_cast<long>(d), tp,
                    ts, ts / tp);
    }
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) set_max_threads(std::atoi(argv[1]));
    std::printf("threads: %d\n", max_threads());
    bench_family(Family::classification, 20000, 50, 5);
    bench_family(Family::classification, 8000, 1000, 3);
    bench_family(Family::robust_regression, 20000, 50, 5);
    bench_family(Family::gmm2, 20000, 3, 5);
    return 0;
}
