#pragma once

#include <cstdint>
#include <utility>

#include "riskscape/models.hpp"

namespace riskscape {

struct Theta0Spec {
    enum class Kind { explicit_vec, random_norm, sparse };
    Kind kind = Kind::random_norm;
    ParamVec vec;       // explicit_vec
    double norm = 1.0;  // target |theta0|_2
    int s0 = 0;         // sparse: s0 entries of norm/sqrt(s0) at seeded positions

    static Theta0Spec explicit_vec(ParamVec v);
    static Theta0Spec random_unit() { return random_norm(1.0); }
    static Theta0Spec random_norm(double nrm);
    static Theta0Spec sparse(int s0, double nrm = 1.0);
};

// eps ~ (1-delta) N(0,1) + delta N(0, sigma2_out)
struct NoiseSpec {
    enum class Kind { none, gaussian, contaminated };
    Kind kind = Kind::gaussian;
    double sigma2 = 1.0;      // gaussian variance
    double delta = 0.0;       // contamination fraction
    double sigma2_out = 1.0;  // outlier variance

    static NoiseSpec none() { return {Kind::none, 0.0, 0.0, 0.0}; }
    static NoiseSpec gaussian(double sigma2 = 1.0) { return {Kind::gaussian, sigma2, 0.0, 0.0}; }
    static NoiseSpec contaminated(double delta, double sigma2_out) {
        return {Kind::contaminated, 1.0, delta, sigma2_out};
    }
};

struct FeatureLaw {
    enum class Kind { standard_gaussian, custom_covariance };
    Kind kind = Kind::standard_gaussian;
    Matrix covariance;  // d x d SPD, custom_covariance only
};

struct GenConfig {
    Family family = Family::classification;
    Eigen::Index n = 0;
    Eigen::Index d = 0;
    Theta0Spec theta0;
    Activation activation = Activation::logistic();  // classification labels
    NoiseSpec noise = NoiseSpec::gaussian();
    FeatureLaw features;
    double separation = 1.5;  // gmm2: D = |c2 - c1|/2
    ParamVec center1, center2;  // gmm2 explicit centers (optional)
    std::uint64_t seed = 0;

    void validate() const;
};

// Deterministic given (cfg, seed); substreams for theta0 / features / noise
// are derived independently so the draws do not shift across families.
std::pair<Dataset, ParamVec> gen_classification(const GenConfig& cfg);
std::pair<Dataset, ParamVec> gen_regression(const GenConfig& cfg);

struct Gmm2Data {
    Dataset data;
    ParamVec center1, center2;
};
Gmm2Data gen_gmm2(const GenConfig& cfg);

ParamVec make_theta0(const Theta0Spec& spec, Eigen::Index d, std::uint64_t seed);

}  // namespace riskscape
