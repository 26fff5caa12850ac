#include "riskscape/fd.hpp"

#include <cmath>
#include <limits>

namespace riskscape {

namespace {

double checked_eval(const ScalarFn& f, const ParamVec& x) {
    const double v = f(x);
    if (!std::isfinite(v)) throw EvalError("fd: objective evaluated to a non-finite value");
    return v;
}

double inf_norm(const ParamVec& x) { return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff(); }

}  // namespace

double fd_default_grad_step(const ParamVec& x) {
    const double eps = std::numeric_limits<double>::epsilon();
    return std::cbrt(eps) * std::max(1.0, inf_norm(x));
}

double fd_default_hess_step(const ParamVec& x) {
    const double eps = std::numeric_limits<double>::epsilon();
    return std::pow(eps, 0.25) * std::max(1.0, inf_norm(x));
}

ParamVec fd_gradient(const ScalarFn& f, const ParamVec& x, double h) {
    if (h <= 0.0) h = fd_default_grad_step(x);
    ParamVec g(x.size());
    ParamVec p = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        p[i] = xi + h;
        const double fp = checked_eval(f, p);
        p[i] = xi - h;
        const double fm = checked_eval(f, p);
        p[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Matrix fd_hessian(const ScalarFn& f, const ParamVec& x, double h) {
    if (h <= 0.0) h = fd_default_hess_step(x);
    const Eigen::Index n = x.size();
    Matrix hess(n, n);
    ParamVec p = x;
    const double f0 = checked_eval(f, x);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double xi = x[i];
        p[i] = xi + h;
        const double fpp = checked_eval(f, p);
        p[i] = xi - h;
        const double fmm = checked_eval(f, p);
        p[i] = xi;
        hess(i, i) = (fpp - 2.0 * f0 + fmm) / (h * h);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double xj = x[j];
            p[i] = xi + h;
            p[j] = xj + h;
            const double fpj = checked_eval(f, p);
            p[j] = xj - h;
            const double fpm = checked_eval(f, p);
            p[i] = xi - h;
            const double fmj = checked_eval(f, p);
            p[j] = xj + h;
            const double fmp = checked_eval(f, p);
            p[i] = xi;
            p[j] = xj;
            const double v = (fpj - fpm - fmp + fmj) / (4.0 * h * h);
            hess(i, j) = v;
            hess(j, i) = v;
        }
    }
    return 0.5 * (hess + hess.transpose());
}

}  // namespace riskscape
