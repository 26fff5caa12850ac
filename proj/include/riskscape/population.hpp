#pragma once

#include <memory>
#include <vector>

#include "riskscape/datagen.hpp"
#include "riskscape/models.hpp"
#include "riskscape/optim.hpp"

namespace riskscape {

// High-accuracy population risk R(theta) = E R_n(theta) with gradient and
// Hessian computed by differentiating under the integral.
//
// reduced-quadrature exploits rotational invariance of the standard Gaussian
// feature law:
//  - classification: expectations depend on theta only through the span of
//    {theta, theta0}, a <= 2-d Gauss-Hermite integral;
//  - robust regression: the residual eps + <theta0 - theta, X> is a centered
//    Gaussian (mixture) in one dimension, integrated segment-wise across the
//    score-function kinks;
//  - gmm2: full tensor rule over the mixture for d <= 3.
// monte-carlo evaluates the empirical risk on one large fixed-seed draw.
struct PopulationOracle {
    enum class Method { reduced_quadrature, monte_carlo };

    Family family = Family::classification;
    Method method = Method::reduced_quadrature;
    int nodes_per_axis = 60;

    ParamVec theta0;  // classification / regression
    Activation activation = Activation::logistic();
    RobustLoss loss = RobustLoss::tukey();
    NoiseSpec noise = NoiseSpec::gaussian();
    ParamVec center1, center2;  // gmm2

    std::shared_ptr<const Dataset> mc_data;
    ModelSpec mc_spec;
    std::uint64_t mc_seed = 0;
};

PopulationOracle make_classification_oracle(ParamVec theta0, Activation act = Activation::logistic(),
                                            int nodes_per_axis = 60);
PopulationOracle make_regression_oracle(ParamVec theta0, RobustLoss loss, NoiseSpec noise,
                                        int nodes_per_axis = 60);
PopulationOracle make_gmm2_oracle(ParamVec center1, ParamVec center2, int nodes_per_axis = 60);
// Fixed-seed draw of m samples from the law described by cfg; evaluations
// reuse the empirical kernels on that draw.
PopulationOracle make_monte_carlo_oracle(const ModelSpec& spec, GenConfig cfg, Eigen::Index m,
                                         std::uint64_t seed);

double pop_risk(const PopulationOracle& oracle, const ParamVec& theta);
ParamVec pop_grad(const PopulationOracle& oracle, const ParamVec& theta);
Matrix pop_hessian(const PopulationOracle& oracle, const ParamVec& theta);

Objective make_pop_objective(const PopulationOracle& oracle);

// Grid supremum of |grad R_n - grad R|_2 and |hess R_n - hess R|_op over the
// supplied thetas (a finite-grid stand-in for the ball supremum; the grid is
// reported alongside, no claim on the true sup is made).
struct GapResult {
    double sup_grad_gap = 0.0;
    double sup_hess_gap = 0.0;
};
GapResult mc_pop_gap(const ModelSpec& spec, const Dataset& data, const PopulationOracle& oracle,
                     const std::vector<ParamVec>& thetas);

}  // namespace riskscape
