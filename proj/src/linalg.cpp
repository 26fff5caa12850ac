#include "riskscape/linalg.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace riskscape {

EigenDecomp sym_eigen(const Matrix& m) {
    if (m.rows() != m.cols()) throw InvalidInput("sym_eigen: matrix not square");
    if (!m.allFinite()) throw InvalidInput("sym_eigen: non-finite entries");
    const Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) throw EvalError("sym_eigen: solver failed");
    const Eigen::Index n = sym.rows();
    EigenDecomp out;
    out.eigenvalues = solver.eigenvalues().reverse();
    out.eigenvectors = solver.eigenvectors().rowwise().reverse();
    (void)n;
    return out;
}

double sym_op_norm(const Matrix& m) {
    const EigenDecomp e = sym_eigen(m);
    const Eigen::Index n = e.eigenvalues.size();
    if (n == 0) return 0.0;
    return std::max(std::abs(e.eigenvalues[0]), std::abs(e.eigenvalues[n - 1]));
}

double lambda_min(const Matrix& m) {
    const EigenDecomp e = sym_eigen(m);
    return e.eigenvalues[e.eigenvalues.size() - 1];
}

double lambda_max(const Matrix& m) {
    const EigenDecomp e = sym_eigen(m);
    return e.eigenvalues[0];
}

ParamVec project_ball(const ParamVec& x, double r) {
    if (!(r > 0.0)) throw InvalidInput("project_ball: radius must be positive");
    const double nrm = x.norm();
    if (nrm <= r) return x;
    ParamVec y = x * (r / nrm);
    // land exactly inside so re-projection is the identity
    for (int i = 0; i < 4 && y.norm() > r; ++i) y *= r / y.norm();
    return y;
}

ParamVec soft_threshold(const ParamVec& x, double t) {
    if (t < 0.0) throw InvalidInput("soft_threshold: negative threshold");
    ParamVec out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double mag = std::abs(x[i]) - t;
        out[i] = mag > 0.0 ? std::copysign(mag, x[i]) : 0.0;
    }
    return out;
}

Matrix random_orthogonal(int d, Rng& rng) {
    Matrix g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    // fix signs so the factorization is unique given g
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q;
}

}  // namespace riskscape
