#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "riskscape/fd.hpp"
#include "riskscape/linalg.hpp"
#include "riskscape/parallel.hpp"
#include "riskscape/quadrature.hpp"
#include "riskscape/rng.hpp"

using namespace riskscape;

TEST_CASE("sym_eigen identity and diagonal") {
    const EigenDecomp id = sym_eigen(Matrix::Identity(3, 3));
    for (int i = 0; i < 3; ++i) CHECK(id.eigenvalues[i] == doctest::Approx(1.0).epsilon(1e-14));

    Matrix diag = Matrix::Zero(2, 2);
    diag(0, 0) = 2.0;
    diag(1, 1) = -1.0;
    const EigenDecomp e = sym_eigen(diag);
    CHECK(e.eigenvalues[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(e.eigenvalues[1] == doctest::Approx(-1.0).epsilon(1e-14));
    // eigenvectors are the axes (up to sign)
    CHECK(std::abs(e.eigenvectors(0, 0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(e.eigenvectors(1, 1)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sym_eigen recovers a constructed spectrum") {
    Rng rng(11);
    const int d = 5;
    const Matrix q = random_orthogonal(d, rng);
    ParamVec lambda(d);
    lambda << 4.0, 1.5, 0.25, -0.5, -3.0;
    const Matrix m = q * lambda.asDiagonal() * q.transpose();
    const EigenDecomp e = sym_eigen(m);
    for (int i = 0; i < d; ++i) CHECK(e.eigenvalues[i] == doctest::Approx(lambda[i]).epsilon(1e-10));
    const double op = std::max(std::abs(lambda[0]), std::abs(lambda[d - 1]));
    CHECK((e.reconstruct() - m).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, op));
    // orthonormality
    CHECK((e.eigenvectors.transpose() * e.eigenvectors - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() <=
          1e-12);
}

TEST_CASE("sym_eigen eigenvalues invariant under orthogonal similarity") {
    Rng rng(22);
    for (int trial = 0; trial < 10; ++trial) {
        const int d = 4;
        Matrix a(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
        const Matrix m = 0.5 * (a + a.transpose());
        const Matrix u = random_orthogonal(d, rng);
        const EigenDecomp e1 = sym_eigen(m);
        const EigenDecomp e2 = sym_eigen(u * m * u.transpose());
        for (int i = 0; i < d; ++i)
            CHECK(std::abs(e1.eigenvalues[i] - e2.eigenvalues[i]) <= 1e-10);
    }
}

TEST_CASE("sym_eigen rejects bad input") {
    Matrix m(2, 2);
    m << 1.0, std::numeric_limits<double>::quiet_NaN(), 0.0, 1.0;
    CHECK_THROWS_AS(sym_eigen(m), InvalidInput);
    CHECK_THROWS_AS(sym_eigen(Matrix::Zero(2, 3)), InvalidInput);
}

TEST_CASE("project_ball basics") {
    ParamVec x(2);
    x << 0.3, 0.4;
    CHECK((project_ball(x, 1.0) - x).norm() == 0.0);

    ParamVec y(2);
    y << 3.0, 4.0;
    const ParamVec py = project_ball(y, 1.0);
    CHECK(py[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(py[1] == doctest::Approx(0.8).epsilon(1e-15));

    const ParamVec z = ParamVec::Zero(3);
    CHECK(project_ball(z, 1.0).norm() == 0.0);
}

TEST_CASE("project_ball is idempotent bitwise") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const ParamVec x = 3.0 * rng.normal_vector(6);
        const double r = rng.uniform(0.1, 2.0);
        const ParamVec p1 = project_ball(x, r);
        const ParamVec p2 = project_ball(p1, r);
        for (Eigen::Index i = 0; i < x.size(); ++i) CHECK(p1[i] == p2[i]);
        CHECK(p1.norm() <= r * (1.0 + 1e-15));
    }
}

TEST_CASE("soft_threshold componentwise") {
    ParamVec x(3);
    x << 2.0, -0.5, 0.0;
    const ParamVec s = soft_threshold(x, 1.0);
    CHECK(s[0] == 1.0);
    CHECK(s[1] == 0.0);
    CHECK(s[2] == 0.0);

    const ParamVec same = soft_threshold(x, 0.0);
    for (int i = 0; i < 3; ++i) CHECK(same[i] == x[i]);

    ParamVec neg(1);
    neg << -3.0;
    CHECK(soft_threshold(neg, 1.0)[0] == -2.0);
}

TEST_CASE("soft_threshold is a contraction") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const ParamVec x = 2.0 * rng.normal_vector(5);
        const ParamVec y = 2.0 * rng.normal_vector(5);
        const double t = rng.uniform(0.0, 1.5);
        CHECK((soft_threshold(x, t) - soft_threshold(y, t)).norm() <= (x - y).norm() + 1e-15);
    }
}

TEST_CASE("fd_gradient on a quadratic and a constant") {
    const ScalarFn quad = [](const ParamVec& x) { return 0.5 * x.squaredNorm(); };
    Rng rng(3);
    const ParamVec x = rng.normal_vector(4);
    const ParamVec g = fd_gradient(quad, x);
    CHECK((g - x).norm() <= 1e-8 * std::max(1.0, x.norm()));

    const ScalarFn constant = [](const ParamVec&) { return 2.5; };
    CHECK(fd_gradient(constant, x).norm() == 0.0);
}

TEST_CASE("fd_hessian of a quadratic form") {
    Rng rng(4);
    Matrix a(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a(i, j) = rng.normal();
    const Matrix h0 = 0.5 * (a + a.transpose());
    const ScalarFn f = [&](const ParamVec& x) { return 0.5 * x.dot(h0 * x); };
    const ParamVec x = rng.normal_vector(3);
    const Matrix h = fd_hessian(f, x);
    CHECK((h - h0).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fd propagates non-finite evaluations") {
    const ScalarFn bad = [](const ParamVec& x) { return std::log(x[0]); };
    ParamVec x(1);
    x << -1.0;
    CHECK_THROWS_AS(fd_gradient(bad, x), EvalError);
}

TEST_CASE("gauss_hermite exactness") {
    // one-point rule
    const QuadratureRule r1 = gauss_hermite(1);
    CHECK(r1.nodes[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(r1.weights[0] == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-14));

    // total weight = sqrt(pi)
    for (int m : {2, 5, 20, 60, 120, 200}) {
        const QuadratureRule r = gauss_hermite(m);
        CHECK(r.weights.sum() == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-12));
        CHECK(r.weights.minCoeff() > 0.0);
    }

    // integral of x^4 e^{-x^2} = 3 sqrt(pi) / 4 at m = 5
    const QuadratureRule r5 = gauss_hermite(5);
    double x4 = 0.0;
    for (int i = 0; i < 5; ++i) x4 += r5.weights[i] * std::pow(r5.nodes[i], 4);
    CHECK(x4 == doctest::Approx(0.75 * std::sqrt(M_PI)).epsilon(1e-12));

    // integral of x^2 e^{-x^2} = sqrt(pi)/2 for m >= 2
    const QuadratureRule r2 = gauss_hermite(2);
    double x2 = 0.0;
    for (int i = 0; i < 2; ++i) x2 += r2.weights[i] * r2.nodes[i] * r2.nodes[i];
    CHECK(x2 == doctest::Approx(0.5 * std::sqrt(M_PI)).epsilon(1e-12));

    CHECK_THROWS_AS(gauss_hermite(0), InvalidInput);
    CHECK_THROWS_AS(gauss_hermite(201), InvalidInput);
}

TEST_CASE("gauss_hermite integrates the logistic by symmetry") {
    // sigma(x) + sigma(-x) = 1, so the integral against e^{-x^2} is sqrt(pi)/2
    const QuadratureRule r = gauss_hermite(40);
    double acc = 0.0;
    for (int i = 0; i < 40; ++i) acc += r.weights[i] / (1.0 + std::exp(-r.nodes[i]));
    CHECK(acc == doctest::Approx(0.5 * std::sqrt(M_PI)).epsilon(1e-12));
}

TEST_CASE("gauss_hermite monomial exactness to degree 2m-1") {
    // exact moments: int x^k e^{-x^2} = Gamma((k+1)/2) for even k, 0 for odd;
    // odd sums cancel, so the error is relative to the summand magnitude
    for (int m : {3, 8, 15}) {
        const QuadratureRule r = gauss_hermite(m);
        for (int k = 0; k <= 2 * m - 1; ++k) {
            double acc = 0.0, scale = 0.0;
            for (Eigen::Index i = 0; i < r.nodes.size(); ++i) {
                acc += r.weights[i] * std::pow(r.nodes[i], k);
                scale += r.weights[i] * std::pow(std::abs(r.nodes[i]), k);
            }
            const double expect = k % 2 == 1 ? 0.0 : std::tgamma(0.5 * (k + 1));
            if (expect == 0.0)
                CHECK(std::abs(acc) <= 1e-10 * std::max(1.0, scale));
            else
                CHECK(acc == doctest::Approx(expect).epsilon(1e-10));
        }
    }
}

TEST_CASE("gauss_legendre and segmented gaussian expectation") {
    // E[t^2] for t ~ N(0, sigma^2), integrand split at an artificial kink
    const double sigma = 1.7;
    const double v = gauss_density_expect([](double t) { return t * t; }, sigma, {0.5}, 40);
    CHECK(v == doctest::Approx(sigma * sigma).epsilon(1e-12));
    // piecewise: |t| has a kink at 0 handled exactly; E|t| = sigma sqrt(2/pi)
    const double va = gauss_density_expect([](double t) { return std::abs(t); }, sigma, {0.0}, 40);
    CHECK(va == doctest::Approx(sigma * std::sqrt(2.0 / M_PI)).epsilon(1e-12));
}

TEST_CASE("normal_expect helpers") {
    const QuadratureRule gh = gauss_hermite(40);
    CHECK(normal_expect(gh, [](double u) { return u * u; }) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(normal_expect2(gh, [](double a, double b) { return a * a * b * b; }) ==
          doctest::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("tensor product rule integrates 2-d polynomials exactly") {
    const TensorRule2 rule = tensor2(gauss_hermite(6), gauss_hermite(6));
    CHECK(rule.nodes.rows() == 36);
    // int x^2 y^4 e^{-x^2-y^2} = Gamma(3/2) Gamma(5/2)
    double acc = 0.0;
    for (Eigen::Index k = 0; k < rule.nodes.rows(); ++k)
        acc += rule.weights[k] * rule.nodes(k, 0) * rule.nodes(k, 0) * std::pow(rule.nodes(k, 1), 4);
    CHECK(acc == doctest::Approx(std::tgamma(1.5) * std::tgamma(2.5)).epsilon(1e-12));
}

TEST_CASE("rng determinism and stream independence") {
    Rng a(123), b(123), c(124);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    bool differs = false;
    Rng a2(123);
    for (int i = 0; i < 10; ++i) differs |= a2.next_u64() != c.next_u64();
    CHECK(differs);

    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("rng gaussian moments") {
    Rng rng(77);
    const int n = 200000;
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        mean += x;
        var += x * x;
    }
    mean /= n;
    var = var / n - mean * mean;
    CHECK(std::abs(mean) <= 0.01);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("blocked reduction is independent of the thread count") {
    const int saved = max_threads();
    const std::size_t n = 10007;
    std::vector<double> xs(n);
    Rng rng(31);
    for (auto& x : xs) x = rng.normal();
    const BlockPlan plan = make_block_plan(n, 128, 64);

    const auto sum_fn = [&](std::size_t b0, std::size_t b1) {
        double acc = 0.0;
        for (std::size_t i = b0; i < b1; ++i) acc += std::sin(xs[i]) * xs[i];
        return acc;
    };
    set_max_threads(1);
    const double s1 = blocked_reduce(plan, 0.0, sum_fn);
    set_max_threads(8);
    const double s8 = blocked_reduce(plan, 0.0, sum_fn);
    set_max_threads(saved);
    CHECK(s1 == s8);  // bitwise: fixed block partition, ordered accumulation
}

TEST_CASE("block plan covers the range exactly once") {
    for (std::size_t n : {0UL, 1UL, 5UL, 1024UL, 10000UL, 500000UL}) {
        const BlockPlan plan = make_block_plan(n, 1024, 64);
        std::size_t covered = 0;
        for (std::size_t b = 0; b < plan.nblocks; ++b) {
            CHECK(plan.begin(b) <= plan.end(b));
            covered += plan.end(b) - plan.begin(b);
        }
        CHECK(covered == n);
    }
}
