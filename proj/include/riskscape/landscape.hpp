#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskscape/optim.hpp"
#include "riskscape/rng.hpp"

namespace riskscape {

struct BallRegion {
    ParamVec center;
    double radius = 1.0;
};

struct CriticalPoint {
    ParamVec location;
    double value = 0.0;
    double grad_norm = 0.0;
    ParamVec eigenvalues;  // descending
    int index = 0;         // count of eigenvalues < -degeneracy tol
    enum class Kind { minimum, saddle, maximum, degenerate } kind = Kind::minimum;
};

std::string kind_name(CriticalPoint::Kind k);

struct CritFindOptions {
    int max_newton_iters = 200;
    double grad_tol = 1e-10;     // polish target (well inside the 1e-8 contract)
    double dedup_tol = 0.0;      // 0 -> 1e-6 * radius
    double degeneracy_tol = 1e-8;
    double wander_factor = 2.0;  // abort starts beyond this multiple of the radius
};

// Multi-start damped Newton on grad F = 0 (pseudo-inverse damping through the
// eigendecomposition, backtracking on |grad F|). Non-converged starts are
// dropped. Results are deduplicated and sorted by objective value.
std::vector<CriticalPoint> find_critical_points(const Objective& obj, const BallRegion& region,
                                                int n_starts, std::uint64_t seed,
                                                const CritFindOptions& opt = {});

// Re-polish a point to the critical-point contract (used after optimizer runs).
CriticalPoint polish_critical_point(const Objective& obj, const ParamVec& start,
                                    const CritFindOptions& opt = {});

struct GridSpec {
    long budget = 100000;   // hard cap on evaluated points
    int per_axis = 0;       // tensor resolution for d <= 3; 0 = derived from budget
    long boundary = 0;      // boundary sample count; 0 = derived
    std::uint64_t seed = 0;
};

struct MorseCertificate {
    BallRegion region;
    GridSpec grid;
    double epsilon = 0.0;
    double eta = 0.0;
    bool holds = false;
    std::vector<ParamVec> witnesses;  // violating points (interior or boundary)
    long points_checked = 0;
};

// Grid-relative (epsilon, eta) strong-Morse check: every sampled interior x
// with |grad F(x)| <= epsilon must have min_i |lambda_i(hess F(x))| >= eta,
// and |grad F| > epsilon on the sampled boundary. Tensor grids for d <= 3,
// radial-stratified + random-direction sampling above.
MorseCertificate certify_strong_morse(const Objective& obj, const BallRegion& region,
                                      const GridSpec& grid, double epsilon, double eta);

struct Match {
    int ia = 0, ib = 0;
    double distance = 0.0;
    bool index_agree = false;
};

struct Pairing {
    std::vector<Match> matches;
    std::vector<int> unmatched_a, unmatched_b;
};

// Greedy nearest-neighbor pairing (globally closest pairs first).
Pairing match_critical_points(const std::vector<CriticalPoint>& a, const std::vector<CriticalPoint>& b);

struct InitLaw {
    enum class Kind { gaussian_scaled, uniform_box };
    Kind kind = Kind::gaussian_scaled;
    double variance_scale = 1.0;  // theta_s ~ N(0, variance_scale / d * I_p)
    ParamVec box_center;
    double box_halfwidth = 1.0;

    static InitLaw gaussian(double scale = 1.0);
    static InitLaw box(ParamVec center, double halfwidth);
};

ParamVec draw_init(const InitLaw& law, Eigen::Index p, Eigen::Index d, Rng& rng);

struct BasinStats {
    double spread = 0.0;  // sqrt(trace of the sample covariance of the finals)
    bool success = false;
    int n_inits = 0;
    int failures = 0;
    std::vector<ParamVec> finals;
};

// Runs the configured optimizer from n_inits seeded draws of the init law.
// Divergence of a run counts as failure and poisons the spread.
BasinStats basin_spread(const ModelSpec& spec, const Dataset& data, const OptConfig& cfg,
                        const InitLaw& law, int n_inits, std::uint64_t seed,
                        double success_eps = 1e-2);

struct SpreadCurve {
    std::vector<int> ks;
    std::vector<double> stds;  // sqrt(trace Var) of the iterates over inits, per k
};

// Per-iteration spread of the iterates across random initializations; runs
// that stop early are held at their final point.
SpreadCurve init_spread_curve(const ModelSpec& spec, const Dataset& data, const OptConfig& cfg,
                              const InitLaw& law, int n_inits, std::uint64_t seed);

void write_spread_curve_csv(const std::string& path, const SpreadCurve& curve);

struct LandscapeConstants {
    double eps0 = 0.0;
    double kappa_lower = 0.0;  // min lambda_min of the Hessian on B(theta0, eps0)
    double kappa_upper = 0.0;  // max |hess|_op on B(0, r)
    double L_lower = 0.0;      // min |grad| outside B(theta0, eps0)
    double L_upper = 0.0;      // max |grad| on B(0, r)
    double T0 = 0.0;           // min <theta - theta0, grad> / |theta - theta0|^2
};

LandscapeConstants measure_landscape_constants(const Objective& obj, const ParamVec& theta0, double r,
                                               double eps0, int n_grid, std::uint64_t seed);

struct LandscapeReport {
    std::vector<CriticalPoint> critical_points;
    Pairing pairing;
    LandscapeConstants constants;
    MorseCertificate certificate;
    bool has_pairing = false;
    bool has_constants = false;
    bool has_certificate = false;
};

// Versioned JSON export: { schema_version, criticalpoints[], pairing[],
// constants{}, certificate{} }.
void write_landscape_report(const std::string& path, const LandscapeReport& report);

}  // namespace riskscape
