#include "riskscape/quadrature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "riskscape/linalg.hpp"

namespace riskscape {

namespace {

// Golub-Welsch: nodes are eigenvalues of the symmetric tridiagonal Jacobi
// matrix, weights are mu0 * (first eigenvector component)^2.
QuadratureRule golub_welsch(const ParamVec& offdiag, double mu0, QuadratureRule::Kind kind) {
    const Eigen::Index m = offdiag.size() + 1;
    Matrix jacobi = Matrix::Zero(m, m);
    for (Eigen::Index k = 0; k + 1 < m; ++k) {
        jacobi(k, k + 1) = offdiag[k];
        jacobi(k + 1, k) = offdiag[k];
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(jacobi);
    QuadratureRule rule;
    rule.kind = kind;
    rule.nodes = solver.eigenvalues();
    rule.weights.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double v0 = solver.eigenvectors()(0, i);
        rule.weights[i] = mu0 * v0 * v0;
    }
    return rule;
}

}  // namespace

QuadratureRule gauss_hermite(int m) {
    if (m < 1 || m > 200) throw InvalidInput("gauss_hermite: node count must be in [1, 200]");
    ParamVec offdiag(m - 1);
    for (int k = 1; k < m; ++k) offdiag[k - 1] = std::sqrt(0.5 * k);
    return golub_welsch(offdiag, std::sqrt(M_PI), QuadratureRule::Kind::gauss_hermite);
}

QuadratureRule gauss_legendre(int m) {
    if (m < 1 || m > 500) throw InvalidInput("gauss_legendre: node count must be in [1, 500]");
    ParamVec offdiag(m - 1);
    for (int k = 1; k < m; ++k) offdiag[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
    return golub_welsch(offdiag, 2.0, QuadratureRule::Kind::gauss_legendre);
}

TensorRule2 tensor2(const QuadratureRule& a, const QuadratureRule& b) {
    TensorRule2 rule;
    const Eigen::Index ma = a.nodes.size(), mb = b.nodes.size();
    rule.nodes.resize(ma * mb, 2);
    rule.weights.resize(ma * mb);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < ma; ++i) {
        for (Eigen::Index j = 0; j < mb; ++j, ++k) {
            rule.nodes(k, 0) = a.nodes[i];
            rule.nodes(k, 1) = b.nodes[j];
            rule.weights[k] = a.weights[i] * b.weights[j];
        }
    }
    return rule;
}

double normal_expect(const QuadratureRule& gh, const std::function<double(double)>& f) {
    const double sqrt2 = std::sqrt(2.0);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < gh.nodes.size(); ++i) acc += gh.weights[i] * f(sqrt2 * gh.nodes[i]);
    return acc / std::sqrt(M_PI);
}

double normal_expect2(const QuadratureRule& gh, const std::function<double(double, double)>& f) {
    const double sqrt2 = std::sqrt(2.0);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < gh.nodes.size(); ++i) {
        double inner = 0.0;
        for (Eigen::Index j = 0; j < gh.nodes.size(); ++j)
            inner += gh.weights[j] * f(sqrt2 * gh.nodes[i], sqrt2 * gh.nodes[j]);
        acc += gh.weights[i] * inner;
    }
    return acc / M_PI;
}

double gauss_density_expect(const std::function<double(double)>& f, double sigma,
                            const std::vector<double>& breakpoints, int nodes_per_segment) {
    if (!(sigma > 0.0)) throw InvalidInput("gauss_density_expect: sigma must be positive");
    const double cut = 12.0 * sigma;
    std::vector<double> edges{-cut, cut};
    for (double b : breakpoints) {
        const double ab = std::abs(b);
        if (ab < cut) {
            edges.push_back(-ab);
            edges.push_back(ab);
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    const QuadratureRule gl = gauss_legendre(nodes_per_segment);
    const double inv_norm = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
    double acc = 0.0;
    for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
        const double lo = edges[s], hi = edges[s + 1];
        const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
        double seg = 0.0;
        for (Eigen::Index i = 0; i < gl.nodes.size(); ++i) {
            const double t = mid + half * gl.nodes[i];
            seg += gl.weights[i] * f(t) * std::exp(-0.5 * (t / sigma) * (t / sigma));
        }
        acc += seg * half;
    }
    return acc * inv_norm;
}

}  // namespace riskscape
