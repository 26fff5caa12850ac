#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "riskscape/models.hpp"

namespace riskscape {

// Smooth objective with optional Hessian (required by trust_region and the
// landscape search).
struct Objective {
    std::function<double(const ParamVec&)> value;
    std::function<ParamVec(const ParamVec&)> grad;
    std::function<Matrix(const ParamVec&)> hess;
};

// Wraps the empirical risk of (spec, data); data must outlive the objective.
Objective make_objective(const ModelSpec& spec, const Dataset& data);

enum class Method { gd, proxgd, trust_region };

struct TrustRegionParams {
    double initial_radius = 1.0;
    double max_radius = 1e6;
    double eta_accept = 0.1;
    double shrink = 0.25;
    double grow = 2.0;
    double curvature_tol = 1e-8;  // second-order stop: lambda_min >= -tol * max(1, |lambda|_max)
};

struct OptConfig {
    Method method = Method::gd;
    double step = 1.0;
    int max_iters = 10000;
    double grad_tol = 1e-8;    // scaled by max(1, |risk|)
    double move_tol = 1e-12;   // scaled by max(1, |theta|)
    double radius = std::numeric_limits<double>::infinity();  // ball constraint
    double lambda = 0.0;       // l1 weight (proxgd)
    bool allow_halving = true; // halve the step on objective increase
    int max_halvings = 30;
    TrustRegionParams tr;
    // iterate storage: every k <= store_every_after, then every store_stride-th
    int store_every_after = 1000;
    int store_stride = 10;
};

enum class StopReason { grad_tolerance, move_tolerance, max_iters, stalled };

std::string stop_reason_name(StopReason r);

struct Trajectory {
    std::vector<int> ks;
    std::vector<ParamVec> iterates;
    std::vector<double> risks;       // smooth risk at each stored iterate
    std::vector<double> grad_norms;  // stationarity measure: |grad| for gd and
                                     // trust_region, the generalized-gradient
                                     // residual |theta - prox_step|/h when lambda > 0
    bool converged = false;
    StopReason reason = StopReason::max_iters;
    bool second_order = false;  // trust_region: curvature test also passed
    ParamVec final;
    int iters = 0;
    long halvings = 0;
    bool at_boundary = false;  // |final| >= 0.999 r (finite-radius runs)
};

struct DivergenceError : std::runtime_error {
    Trajectory partial;
    explicit DivergenceError(Trajectory t)
        : std::runtime_error("optimizer diverged: non-finite objective"), partial(std::move(t)) {}
};

// Projected gradient descent on the ball of cfg.radius.
Trajectory gd_projected(const Objective& obj, const ParamVec& init, const OptConfig& cfg);
// Proximal step: project_ball(soft_threshold(theta - h grad, h lambda), r).
Trajectory prox_gd(const Objective& obj, const ParamVec& init, const OptConfig& cfg);
// Classical trust region with the exact subproblem solved by
// eigendecomposition and a secular-equation root find (hard case handled
// along the smallest eigenvector).
Trajectory trust_region(const Objective& obj, const ParamVec& init, const OptConfig& cfg);

Trajectory gd_projected(const ModelSpec& spec, const Dataset& data, const ParamVec& init, const OptConfig& cfg);
Trajectory prox_gd(const ModelSpec& spec, const Dataset& data, const ParamVec& init, const OptConfig& cfg);
Trajectory trust_region(const ModelSpec& spec, const Dataset& data, const ParamVec& init, const OptConfig& cfg);

Trajectory run_optimizer(const ModelSpec& spec, const Dataset& data, const ParamVec& init, const OptConfig& cfg);

// Exact solution of min_{|s| <= delta} <g,s> + 0.5 <s,Hs> given the
// eigendecomposition of H. Exposed for testing.
ParamVec tr_subproblem(const ParamVec& eigenvalues, const Matrix& eigenvectors, const ParamVec& g,
                       double delta);

// Columns: k, risk, grad_norm, dist_to_reference (reference defaults to the
// final iterate).
void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const std::optional<ParamVec>& reference = std::nullopt);

}  // namespace riskscape
