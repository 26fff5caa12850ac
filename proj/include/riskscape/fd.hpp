#pragma once

#include <functional>

#include "riskscape/common.hpp"

namespace riskscape {

using ScalarFn = std::function<double(const ParamVec&)>;

// Central-difference steps: cbrt(eps) for gradients, eps^(1/4) for Hessians,
// scaled by max(1, |x|_inf).
double fd_default_grad_step(const ParamVec& x);
double fd_default_hess_step(const ParamVec& x);

// Central differences; pass h <= 0 for the default step.
// Throws EvalError if f evaluates to a non-finite value.
ParamVec fd_gradient(const ScalarFn& f, const ParamVec& x, double h = 0.0);

// Central second differences, symmetrized by averaging with the transpose.
Matrix fd_hessian(const ScalarFn& f, const ParamVec& x, double h = 0.0);

}  // namespace riskscape
