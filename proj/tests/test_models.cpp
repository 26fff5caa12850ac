#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "riskscape/datagen.hpp"
#include "riskscape/fd.hpp"
#include "riskscape/linalg.hpp"
#include "riskscape/models.hpp"
#include "riskscape/rng.hpp"

using namespace riskscape;

namespace {

Dataset random_dataset(Family family, Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    GenConfig g;
    g.family = family;
    g.n = n;
    g.d = d;
    g.seed = seed;
    g.theta0 = Theta0Spec::random_norm(1.0);
    switch (family) {
        case Family::classification: return gen_classification(g).first;
        case Family::robust_regression: return gen_regression(g).first;
        case Family::gmm2: return gen_gmm2(g).data;
    }
    return {};
}

ModelSpec spec_for(Family family) {
    ModelSpec spec;
    spec.family = family;
    spec.radius = 10.0;
    return spec;
}

}  // namespace

TEST_CASE("activation derivative chains agree with finite differences") {
    for (const Activation& act : {Activation::logistic(), Activation::probit()}) {
        const double h = 1e-5;
        for (double z = -10.0; z <= 10.0; z += 0.37) {
            CHECK(act.value(z) >= 0.0);
            CHECK(act.value(z) <= 1.0);
            const double fd1 = (act.value(z + h) - act.value(z - h)) / (2 * h);
            const double fd2 = (act.d1(z + h) - act.d1(z - h)) / (2 * h);
            const double fd3 = (act.d2(z + h) - act.d2(z - h)) / (2 * h);
            CHECK(std::abs(act.d1(z) - fd1) <= 1e-6);
            CHECK(std::abs(act.d2(z) - fd2) <= 1e-6);
            CHECK(std::abs(act.d3(z) - fd3) <= 1e-6);
        }
        // monotone increasing (strictly until the doubles saturate)
        double prev = act.value(-10.0);
        for (double z = -9.5; z <= 10.0; z += 0.5) {
            CHECK(act.value(z) >= prev);
            if (std::abs(z) <= 8.0) CHECK(act.value(z) > prev);
            prev = act.value(z);
        }
    }
}

TEST_CASE("robust losses: shape, oddness, derivative chains") {
    for (const RobustLoss& loss : {RobustLoss::tukey(4.685), RobustLoss::huber(1.345)}) {
        const double h = 1e-6;
        for (double t = -8.0; t <= 8.0; t += 0.173) {
            // psi odd
            CHECK(std::abs(loss.psi(t) + loss.psi(-t)) <= 1e-12);
            if (std::abs(std::abs(t) - loss.t0) > 1e-2) {
                const double fd1 = (loss.rho(t + h) - loss.rho(t - h)) / (2 * h);
                CHECK(std::abs(loss.psi(t) - fd1) <= 1e-6);
                const double fd2 = (loss.psi(t + h) - loss.psi(t - h)) / (2 * h);
                CHECK(std::abs(loss.dpsi(t) - fd2) <= 1e-5);
            }
        }
    }
    const RobustLoss tukey = RobustLoss::tukey(4.685);
    CHECK(tukey.rho(0.0) == 0.0);
    CHECK(tukey.rho(4.685) == 1.0);
    CHECK(tukey.rho(9.0) == 1.0);
    CHECK(tukey.rho(-20.0) == 1.0);
    const RobustLoss huber = RobustLoss::huber(1.345);
    CHECK(huber.dpsi(0.5) == 1.0);   // rho'' = 1 in the quadratic zone
    CHECK(huber.dpsi(2.0) == 0.0);
}

TEST_CASE("classification risk at theta = 0 is exactly 1/4") {
    const Dataset data = random_dataset(Family::classification, 64, 5, 1);
    const ModelSpec spec = spec_for(Family::classification);
    CHECK(risk(spec, data, ParamVec::Zero(5)) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("classification risk bounded in [0,1]") {
    const Dataset data = random_dataset(Family::classification, 50, 4, 2);
    const ModelSpec spec = spec_for(Family::classification);
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const double r = risk(spec, data, 3.0 * rng.normal_vector(4));
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
    }
}

TEST_CASE("regression risk zero on a noiseless exact fit; tukey bounded") {
    GenConfig g;
    g.family = Family::robust_regression;
    g.n = 40;
    g.d = 3;
    g.noise = NoiseSpec::none();
    g.seed = 5;
    auto [data, theta0] = gen_regression(g);
    const ModelSpec spec = spec_for(Family::robust_regression);
    CHECK(risk(spec, data, theta0) == 0.0);
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const double r = risk(spec, data, 5.0 * rng.normal_vector(3));
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
    }
}

TEST_CASE("gmm2 risk collapses to the single-gaussian objective when centers merge") {
    const Dataset data = random_dataset(Family::gmm2, 30, 2, 7);
    const ModelSpec spec = spec_for(Family::gmm2);
    Rng rng(8);
    const ParamVec m = rng.normal_vector(2);
    ParamVec theta(4);
    theta << m, m;
    double direct = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i)
        direct += 0.5 * (data.features.row(i).transpose() - m).squaredNorm();
    direct = direct / static_cast<double>(data.n()) + std::log(2.0 * M_PI);  // (d/2) log 2pi, d = 2
    CHECK(risk(spec, data, theta) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("gmm2 exchange symmetry is exact") {
    const Dataset data = random_dataset(Family::gmm2, 25, 3, 9);
    const ModelSpec spec = spec_for(Family::gmm2);
    Rng rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        ParamVec theta(6);
        theta = rng.normal_vector(6);
        ParamVec swapped(6);
        swapped << theta.tail(3), theta.head(3);
        CHECK(risk(spec, data, theta) == risk(spec, data, swapped));
        const ParamVec g = gradient(spec, data, theta);
        const ParamVec gs = gradient(spec, data, swapped);
        for (int i = 0; i < 3; ++i) {
            CHECK(g[i] == gs[3 + i]);
            CHECK(g[3 + i] == gs[i]);
        }
    }
}

TEST_CASE("gmm2 posterior properties") {
    Rng rng(11);
    const ParamVec th = rng.normal_vector(3);
    const ParamVec z = rng.normal_vector(3);
    CHECK(gmm_posterior1(th, th, z) == 0.5);
    for (int trial = 0; trial < 20; ++trial) {
        const ParamVec a = 3.0 * rng.normal_vector(3);
        const ParamVec b = 3.0 * rng.normal_vector(3);
        const double p1 = gmm_posterior1(a, b, z);
        CHECK(p1 > 0.0);
        CHECK(p1 < 1.0);
    }
    // w12 = 1/4 exactly at equal centers: hessian rank-1 coefficient check
    ParamVec theta(6);
    theta << th, th;
    const Matrix h = gmm_point_hess(theta, z);
    // H11 = w1 I - w12 aa^T with w1 = 1/2, w12 = 1/4
    const ParamVec a = z - th;
    const Matrix expect = 0.5 * Matrix::Identity(3, 3) - 0.25 * (a * a.transpose());
    CHECK((h.topLeftCorner(3, 3) - expect).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("huber hessian equals the gram matrix when residuals stay quadratic") {
    GenConfig g;
    g.family = Family::robust_regression;
    g.n = 40;
    g.d = 4;
    g.noise = NoiseSpec::none();
    g.seed = 12;
    auto [data, theta0] = gen_regression(g);
    ModelSpec spec = spec_for(Family::robust_regression);
    spec.loss = RobustLoss::huber(1.345);
    // all residuals are zero at theta0, well inside the quadratic region
    const Matrix h = hessian(spec, data, theta0);
    const Matrix gram = (data.features.transpose() * data.features) / static_cast<double>(data.n());
    CHECK((h - gram).cwiseAbs().maxCoeff() <= 1e-15 * gram.cwiseAbs().maxCoeff());
}

TEST_CASE("per-sample gradients average to the full gradient") {
    for (Family family : {Family::classification, Family::robust_regression, Family::gmm2}) {
        const Dataset data = random_dataset(family, 17, 3, 13);
        const ModelSpec spec = spec_for(family);
        Rng rng(14);
        const ParamVec theta = 0.5 * rng.normal_vector(spec.param_dim(3));
        ParamVec mean = ParamVec::Zero(theta.size());
        for (Eigen::Index i = 0; i < data.n(); ++i) mean += per_sample_grad(spec, data, i, theta);
        mean /= static_cast<double>(data.n());
        CHECK((mean - gradient(spec, data, theta)).norm() <= 1e-12);
        CHECK_THROWS_AS(per_sample_grad(spec, data, 17, theta), InvalidInput);
    }
}

TEST_CASE("single-sample dataset: per-sample gradient equals the gradient") {
    const Dataset data = random_dataset(Family::classification, 1, 4, 15);
    const ModelSpec spec = spec_for(Family::classification);
    Rng rng(16);
    const ParamVec theta = rng.normal_vector(4);
    CHECK((per_sample_grad(spec, data, 0, theta) - gradient(spec, data, theta)).norm() == 0.0);
}

TEST_CASE("zero-residual classification sample has zero per-sample gradient") {
    // at margin 40 the logistic saturates to 1.0 in double precision, so
    // y = sigma(<theta,x>) holds exactly and the residual vanishes
    Dataset data;
    data.response_kind = ResponseKind::binary;
    data.features.resize(1, 2);
    data.features << 40.0, 0.0;
    data.responses.resize(1);
    data.responses << 1.0;
    const ModelSpec spec = spec_for(Family::classification);
    ParamVec theta(2);
    theta << 1.0, 0.0;
    CHECK(per_sample_grad(spec, data, 0, theta).norm() == 0.0);
}

TEST_CASE("analytic derivatives match finite differences across families") {
    Rng seeds(1234);
    for (Family family : {Family::classification, Family::robust_regression, Family::gmm2}) {
        const ModelSpec spec = spec_for(family);
        for (int trial = 0; trial < 10; ++trial) {
            const auto d = static_cast<Eigen::Index>(1 + seeds.uniform_index(6));
            const auto n = static_cast<Eigen::Index>(5 + seeds.uniform_index(30));
            const Dataset data = random_dataset(family, n, d, seeds.next_u64());
            Rng rng(seeds.next_u64());
            const ParamVec theta = 0.7 * rng.normal_vector(spec.param_dim(d));
            const ScalarFn f = [&](const ParamVec& th) { return risk(spec, data, th); };

            const ParamVec g = gradient(spec, data, theta);
            const ParamVec gfd = fd_gradient(f, theta);
            CHECK((g - gfd).norm() <= 1e-5 * std::max(1.0, gfd.norm()));

            const Matrix h = hessian(spec, data, theta);
            const Matrix hfd = fd_hessian(f, theta);
            CHECK(sym_op_norm(h - hfd) <= 1e-4 * std::max(1.0, sym_op_norm(hfd)));
        }
    }
}

TEST_CASE("parallel kernels match the serial reference") {
    for (Family family : {Family::classification, Family::robust_regression, Family::gmm2}) {
        const ModelSpec spec = spec_for(family);
        const auto d = family == Family::gmm2 ? 3 : 20;
        const Dataset data = random_dataset(family, 4096, d, 99);
        Rng rng(100);
        const ParamVec theta = 0.4 * rng.normal_vector(spec.param_dim(d));
        CHECK(risk(spec, data, theta) ==
              doctest::Approx(ref::risk(spec, data, theta)).epsilon(1e-13));
        CHECK((gradient(spec, data, theta) - ref::gradient(spec, data, theta)).norm() <=
              1e-13 * std::max(1.0, ref::gradient(spec, data, theta).norm()));
        CHECK(sym_op_norm(hessian(spec, data, theta) - ref::hessian(spec, data, theta)) <= 1e-12);
    }
}

TEST_CASE("population stationarity of theta0 at scale (monte-carlo over seeds)") {
    // |grad R_n(theta0)| <= 5 sqrt(d/n) across seeds for both regression-style families
    const Eigen::Index d = 8, n = 4000;
    int ok_class = 0, ok_reg = 0;
    const int reps = 10;
    for (int repetition = 0; repetition < reps; ++repetition) {
        GenConfig g;
        g.n = n;
        g.d = d;
        g.seed = 500 + static_cast<std::uint64_t>(repetition);
        g.family = Family::classification;
        {
            auto [data, th0] = gen_classification(g);
            ModelSpec spec = spec_for(Family::classification);
            if (gradient(spec, data, th0).norm() <= 5.0 * std::sqrt(static_cast<double>(d) / n)) ++ok_class;
        }
        g.family = Family::robust_regression;
        {
            auto [data, th0] = gen_regression(g);
            ModelSpec spec = spec_for(Family::robust_regression);
            if (gradient(spec, data, th0).norm() <= 5.0 * std::sqrt(static_cast<double>(d) / n)) ++ok_reg;
        }
    }
    CHECK(ok_class >= reps - 1);
    CHECK(ok_reg >= reps - 1);
}

TEST_CASE("input validation") {
    const Dataset data = random_dataset(Family::classification, 10, 3, 17);
    const ModelSpec spec = spec_for(Family::classification);
    CHECK_THROWS_AS(risk(spec, data, ParamVec::Zero(5)), InvalidInput);

    ModelSpec bad = spec;
    bad.theta0 = ParamVec::Constant(3, 10.0);  // norm 17 > r/3
    CHECK_THROWS_AS(bad.validate(), InvalidInput);

    Dataset broken = data;
    broken.responses[0] = 0.5;
    CHECK_THROWS_AS(broken.validate(), InvalidInput);
}
