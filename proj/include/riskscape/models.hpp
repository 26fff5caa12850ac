#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "riskscape/common.hpp"

namespace riskscape {

enum class Family { classification, robust_regression, gmm2 };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// Monotone activation into [0,1] with three analytic derivatives.
struct Activation {
    std::string name = "logistic";
    std::function<double(double)> value, d1, d2, d3;

    static Activation logistic();
    static Activation probit();
};

// Robust loss rho with score psi = rho' and two more derivatives. breakpoints
// lists the |t| kink locations (used by the population oracle to split
// quadrature segments).
struct RobustLoss {
    std::string name = "tukey";
    double t0 = 4.685;
    std::function<double(double)> rho, psi, dpsi, d2psi;
    std::vector<double> breakpoints;

    // rho in [0,1], flat (== 1) beyond |t| >= t0
    static RobustLoss tukey(double t0 = 4.685);
    // quadratic core scaled so rho'' <= 1, linear tails; c = 1.345 is the
    // classical 95%-efficiency threshold
    static RobustLoss huber(double c = 1.345);
};

enum class ResponseKind { binary, real, none };

struct Dataset {
    RowMatrix features;  // n x d
    ParamVec responses;  // n (binary stored as 0/1 doubles) or empty
    ResponseKind response_kind = ResponseKind::none;
    std::optional<Family> family;

    Eigen::Index n() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }
    void validate() const;  // finiteness, response shape/kind consistency
};

struct ModelSpec {
    Family family = Family::classification;
    Activation activation = Activation::logistic();
    RobustLoss loss = RobustLoss::tukey();
    double radius = 10.0;
    std::optional<ParamVec> theta0;
    double lambda = 0.0;

    Eigen::Index param_dim(Eigen::Index d) const { return family == Family::gmm2 ? 2 * d : d; }
    // well-posedness margin: |theta0| <= r/3 (r/2 when lambda > 0)
    void validate() const;
};

// Posterior weight of component 1 for the two-component mixture; equals
// 1/2 exactly when th1 == th2.
double gmm_posterior1(const Eigen::Ref<const ParamVec>& th1, const Eigen::Ref<const ParamVec>& th2,
                      const Eigen::Ref<const ParamVec>& z);

// Single-point mixture terms (theta = [th1; th2], z one observation); the
// population oracle integrates these directly. The loss keeps the 1/2 mixture
// weights and the full (2 pi)^{d/2} normalization, so risk values equal the
// exact per-sample negative log-likelihood (comparable across oracles).
double gmm_point_loss(const ParamVec& theta, const Eigen::Ref<const ParamVec>& z);
ParamVec gmm_point_grad(const ParamVec& theta, const Eigen::Ref<const ParamVec>& z);
Matrix gmm_point_hess(const ParamVec& theta, const Eigen::Ref<const ParamVec>& z);

// Empirical risk, gradient and Hessian of the configured family at theta.
// Parallel over fixed sample blocks; results are independent of the worker
// count. theta has length d (2d for gmm2).
double risk(const ModelSpec& spec, const Dataset& data, const ParamVec& theta);
ParamVec gradient(const ModelSpec& spec, const Dataset& data, const ParamVec& theta);
Matrix hessian(const ModelSpec& spec, const Dataset& data, const ParamVec& theta);

double per_sample_loss(const ModelSpec& spec, const Dataset& data, Eigen::Index i, const ParamVec& theta);
ParamVec per_sample_grad(const ModelSpec& spec, const Dataset& data, Eigen::Index i, const ParamVec& theta);

// Serial reference path, kept for testing the parallel kernels against.
namespace ref {
double risk(const ModelSpec& spec, const Dataset& data, const ParamVec& theta);
ParamVec gradient(const ModelSpec& spec, const Dataset& data, const ParamVec& theta);
Matrix hessian(const ModelSpec& spec, const Dataset& data, const ParamVec& theta);
}  // namespace ref

}  // namespace riskscape
