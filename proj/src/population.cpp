#include "riskscape/population.hpp"

#include <cmath>

#include "riskscape/linalg.hpp"
#include "riskscape/quadrature.hpp"

namespace riskscape {

namespace {

// orthonormal basis of span{theta0, theta}; coords[i] = (<theta0,e_i>, <theta,e_i>)
struct SpanBasis {
    std::vector<ParamVec> e;
    std::vector<double> b;  // theta0 coordinates
    std::vector<double> a;  // theta coordinates
};

SpanBasis span_basis(const ParamVec& theta0, const ParamVec& theta) {
    SpanBasis s;
    const double tol = 1e-13;
    const double n0 = theta0.norm();
    if (n0 > tol) {
        s.e.push_back(theta0 / n0);
        s.b.push_back(n0);
        s.a.push_back(theta.dot(s.e[0]));
    }
    ParamVec perp = theta;
    for (std::size_t i = 0; i < s.e.size(); ++i) perp -= theta.dot(s.e[i]) * s.e[i];
    const double np = perp.norm();
    if (np > tol * std::max(1.0, theta.norm())) {
        s.e.push_back(perp / np);
        s.b.push_back(0.0);
        s.a.push_back(theta.dot(s.e.back()));
    }
    if (s.e.empty() && theta.norm() > tol) {
        s.e.push_back(theta / theta.norm());
        s.b.push_back(0.0);
        s.a.push_back(theta.norm());
    }
    return s;
}

// accumulate sums of f(u) * monomials(u) against the k-dim standard normal
template <class Fn>
void normal_sweep(const QuadratureRule& gh, int k, Fn&& fn) {
    const double sqrt2 = std::sqrt(2.0);
    const double norm1 = 1.0 / std::sqrt(M_PI);
    if (k == 0) {
        fn(0.0, 0.0, 1.0);
        return;
    }
    if (k == 1) {
        for (Eigen::Index i = 0; i < gh.nodes.size(); ++i)
            fn(sqrt2 * gh.nodes[i], 0.0, norm1 * gh.weights[i]);
        return;
    }
    for (Eigen::Index i = 0; i < gh.nodes.size(); ++i)
        for (Eigen::Index j = 0; j < gh.nodes.size(); ++j)
            fn(sqrt2 * gh.nodes[i], sqrt2 * gh.nodes[j], norm1 * norm1 * gh.weights[i] * gh.weights[j]);
}

// ---- classification ----

double class_risk(const PopulationOracle& o, const ParamVec& theta) {
    const SpanBasis s = span_basis(o.theta0, theta);
    const auto k = static_cast<int>(s.e.size());
    const QuadratureRule gh = gauss_hermite(o.nodes_per_axis);
    const auto& act = o.activation;
    double acc = 0.0;
    normal_sweep(gh, k, [&](double u1, double u2, double w) {
        double ut = 0.0, u0 = 0.0;
        if (k >= 1) { ut += s.a[0] * u1; u0 += s.b[0] * u1; }
        if (k >= 2) { ut += s.a[1] * u2; u0 += s.b[1] * u2; }
        const double s0 = act.value(u0);
        const double st = act.value(ut);
        acc += w * (s0 * (1.0 - s0) + (st - s0) * (st - s0));
    });
    return acc;
}

ParamVec class_grad(const PopulationOracle& o, const ParamVec& theta) {
    const SpanBasis s = span_basis(o.theta0, theta);
    const auto k = static_cast<int>(s.e.size());
    const QuadratureRule gh = gauss_hermite(o.nodes_per_axis);
    const auto& act = o.activation;
    double c1 = 0.0, c2 = 0.0;
    normal_sweep(gh, k, [&](double u1, double u2, double w) {
        double ut = 0.0, u0 = 0.0;
        if (k >= 1) { ut += s.a[0] * u1; u0 += s.b[0] * u1; }
        if (k >= 2) { ut += s.a[1] * u2; u0 += s.b[1] * u2; }
        const double alpha = 2.0 * (act.value(ut) - act.value(u0)) * act.d1(ut);
        c1 += w * alpha * u1;
        c2 += w * alpha * u2;
    });
    ParamVec g = ParamVec::Zero(theta.size());
    if (k >= 1) g += c1 * s.e[0];
    if (k >= 2) g += c2 * s.e[1];
    return g;
}

Matrix class_hess(const PopulationOracle& o, const ParamVec& theta) {
    const SpanBasis s = span_basis(o.theta0, theta);
    const auto k = static_cast<int>(s.e.size());
    const QuadratureRule gh = gauss_hermite(o.nodes_per_axis);
    const auto& act = o.activation;
    double m0 = 0.0, m11 = 0.0, m12 = 0.0, m22 = 0.0;
    normal_sweep(gh, k, [&](double u1, double u2, double w) {
        double ut = 0.0, u0 = 0.0;
        if (k >= 1) { ut += s.a[0] * u1; u0 += s.b[0] * u1; }
        if (k >= 2) { ut += s.a[1] * u2; u0 += s.b[1] * u2; }
        const double s1 = act.d1(ut);
        const double beta = 2.0 * (s1 * s1 + (act.value(ut) - act.value(u0)) * act.d2(ut));
        m0 += w * beta;
        m11 += w * beta * u1 * u1;
        m12 += w * beta * u1 * u2;
        m22 += w * beta * u2 * u2;
    });
    const Eigen::Index p = theta.size();
    Matrix h = m0 * Matrix::Identity(p, p);
    if (k >= 1) h += (m11 - m0) * (s.e[0] * s.e[0].transpose());
    if (k >= 2) {
        h += (m22 - m0) * (s.e[1] * s.e[1].transpose());
        h += m12 * (s.e[0] * s.e[1].transpose() + s.e[1] * s.e[0].transpose());
    }
    return h;
}

// ---- robust regression ----

struct NoiseMixture {
    std::vector<double> weight;
    std::vector<double> sigma;  // std dev of each centered component
};

NoiseMixture noise_mixture(const NoiseSpec& n) {
    switch (n.kind) {
        case NoiseSpec::Kind::none: return {{1.0}, {0.0}};
        case NoiseSpec::Kind::gaussian: return {{1.0}, {std::sqrt(n.sigma2)}};
        case NoiseSpec::Kind::contaminated:
            return {{1.0 - n.delta, n.delta}, {1.0, std::sqrt(n.sigma2_out)}};
    }
    return {{1.0}, {0.0}};
}

// E[f(T)] for T ~ N(0, sigma^2), degenerating to f(0) at sigma = 0
double component_expect(const std::function<double(double)>& f, double sigma,
                        const std::vector<double>& breaks, int nodes) {
    if (sigma <= 1e-300) return f(0.0);
    return gauss_density_expect(f, sigma, breaks, nodes);
}

struct RegIntegrals {
    double rho = 0.0;      // E rho(t)
    double tpsi = 0.0;     // E t psi(t), per-component a_j applied
    double dpsi = 0.0;     // E psi'(t)
    double wwdpsi = 0.0;   // E psi'(t) w^2
    double psiw = 0.0;     // E psi(t) w
};

RegIntegrals reg_integrals(const PopulationOracle& o, const ParamVec& theta) {
    const NoiseMixture mix = noise_mixture(o.noise);
    const double s = (o.theta0 - theta).norm();
    const auto& loss = o.loss;
    RegIntegrals out;
    for (std::size_t j = 0; j < mix.weight.size(); ++j) {
        const double pi_j = mix.weight[j];
        const double st = std::sqrt(mix.sigma[j] * mix.sigma[j] + s * s);
        const double e_rho = component_expect(loss.rho, st, loss.breakpoints, o.nodes_per_axis);
        const double e_tpsi = component_expect([&](double t) { return t * loss.psi(t); }, st,
                                               loss.breakpoints, o.nodes_per_axis);
        const double e_dpsi = component_expect(loss.dpsi, st, loss.breakpoints, o.nodes_per_axis);
        const double e_t2dpsi = component_expect([&](double t) { return t * t * loss.dpsi(t); }, st,
                                                 loss.breakpoints, o.nodes_per_axis);
        out.rho += pi_j * e_rho;
        out.dpsi += pi_j * e_dpsi;
        if (st > 0.0) {
            const double a = s / (st * st);
            const double v = 1.0 - (s * s) / (st * st);
            out.psiw += pi_j * a * e_tpsi;
            out.wwdpsi += pi_j * (a * a * e_t2dpsi + v * e_dpsi);
        } else {
            out.wwdpsi += pi_j * e_dpsi;
        }
        out.tpsi += pi_j * e_tpsi;
    }
    return out;
}

double reg_risk(const PopulationOracle& o, const ParamVec& theta) { return reg_integrals(o, theta).rho; }

ParamVec reg_grad(const PopulationOracle& o, const ParamVec& theta) {
    const ParamVec delta = o.theta0 - theta;
    const double s = delta.norm();
    if (s <= 1e-300) return ParamVec::Zero(theta.size());
    const RegIntegrals I = reg_integrals(o, theta);
    return -(I.psiw) * (delta / s);
}

Matrix reg_hess(const PopulationOracle& o, const ParamVec& theta) {
    const ParamVec delta = o.theta0 - theta;
    const double s = delta.norm();
    const RegIntegrals I = reg_integrals(o, theta);
    const Eigen::Index p = theta.size();
    if (s <= 1e-300) return I.dpsi * Matrix::Identity(p, p);
    const ParamVec e = delta / s;
    return I.dpsi * Matrix::Identity(p, p) + (I.wwdpsi - I.dpsi) * (e * e.transpose());
}

// ---- gmm2 ----

// E_{Z ~ N(c, I_d)}[f(Z)] by a d-dim tensor Gauss-Hermite rule, d <= 3
template <class Fn>
void gaussian_tensor_sweep(const QuadratureRule& gh, const ParamVec& c, Fn&& fn) {
    const auto d = static_cast<int>(c.size());
    const double sqrt2 = std::sqrt(2.0);
    const double norm1 = 1.0 / std::sqrt(M_PI);
    const Eigen::Index m = gh.nodes.size();
    ParamVec z(d);
    if (d == 1) {
        for (Eigen::Index i = 0; i < m; ++i) {
            z[0] = c[0] + sqrt2 * gh.nodes[i];
            fn(z, norm1 * gh.weights[i]);
        }
    } else if (d == 2) {
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j) {
                z[0] = c[0] + sqrt2 * gh.nodes[i];
                z[1] = c[1] + sqrt2 * gh.nodes[j];
                fn(z, norm1 * norm1 * gh.weights[i] * gh.weights[j]);
            }
    } else {
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                for (Eigen::Index l = 0; l < m; ++l) {
                    z[0] = c[0] + sqrt2 * gh.nodes[i];
                    z[1] = c[1] + sqrt2 * gh.nodes[j];
                    z[2] = c[2] + sqrt2 * gh.nodes[l];
                    fn(z, norm1 * norm1 * norm1 * gh.weights[i] * gh.weights[j] * gh.weights[l]);
                }
    }
}

void check_gmm_quadrature_dim(const PopulationOracle& o) {
    if (o.center1.size() > 3)
        throw Unsupported("gmm2 reduced-quadrature supports d <= 3; use monte-carlo");
}

template <class Acc, class PointFn>
Acc gmm_mixture_expect(const PopulationOracle& o, Acc zero, PointFn&& point) {
    check_gmm_quadrature_dim(o);
    const QuadratureRule gh = gauss_hermite(o.nodes_per_axis);
    Acc acc = zero;
    gaussian_tensor_sweep(gh, o.center1, [&](const ParamVec& z, double w) { acc += 0.5 * w * point(z); });
    gaussian_tensor_sweep(gh, o.center2, [&](const ParamVec& z, double w) { acc += 0.5 * w * point(z); });
    return acc;
}

}  // namespace

PopulationOracle make_classification_oracle(ParamVec theta0, Activation act, int nodes_per_axis) {
    PopulationOracle o;
    o.family = Family::classification;
    o.theta0 = std::move(theta0);
    o.activation = std::move(act);
    o.nodes_per_axis = nodes_per_axis;
    return o;
}

PopulationOracle make_regression_oracle(ParamVec theta0, RobustLoss loss, NoiseSpec noise,
                                        int nodes_per_axis) {
    PopulationOracle o;
    o.family = Family::robust_regression;
    o.theta0 = std::move(theta0);
    o.loss = std::move(loss);
    o.noise = noise;
    o.nodes_per_axis = nodes_per_axis;
    return o;
}

PopulationOracle make_gmm2_oracle(ParamVec center1, ParamVec center2, int nodes_per_axis) {
    if (center1.size() != center2.size()) throw InvalidInput("gmm2 oracle: center dimension mismatch");
    PopulationOracle o;
    o.family = Family::gmm2;
    o.center1 = std::move(center1);
    o.center2 = std::move(center2);
    o.nodes_per_axis = nodes_per_axis;
    check_gmm_quadrature_dim(o);
    return o;
}

PopulationOracle make_monte_carlo_oracle(const ModelSpec& spec, GenConfig cfg, Eigen::Index m,
                                         std::uint64_t seed) {
    PopulationOracle o;
    o.family = spec.family;
    o.method = PopulationOracle::Method::monte_carlo;
    o.mc_spec = spec;
    o.mc_seed = seed;
    cfg.family = spec.family;
    cfg.n = m;
    cfg.seed = seed;
    auto data = std::make_shared<Dataset>();
    switch (spec.family) {
        case Family::classification: {
            auto [ds, th0] = gen_classification(cfg);
            *data = std::move(ds);
            o.theta0 = th0;
            break;
        }
        case Family::robust_regression: {
            auto [ds, th0] = gen_regression(cfg);
            *data = std::move(ds);
            o.theta0 = th0;
            o.loss = spec.loss;
            o.noise = cfg.noise;
            break;
        }
        case Family::gmm2: {
            auto g = gen_gmm2(cfg);
            *data = std::move(g.data);
            o.center1 = g.center1;
            o.center2 = g.center2;
            break;
        }
    }
    o.mc_data = std::move(data);
    return o;
}

double pop_risk(const PopulationOracle& o, const ParamVec& theta) {
    if (!theta.allFinite()) throw InvalidInput("pop_risk: non-finite theta");
    if (o.method == PopulationOracle::Method::monte_carlo) return risk(o.mc_spec, *o.mc_data, theta);
    switch (o.family) {
        case Family::classification: return class_risk(o, theta);
        case Family::robust_regression: return reg_risk(o, theta);
        case Family::gmm2:
            return gmm_mixture_expect(o, 0.0, [&](const ParamVec& z) { return gmm_point_loss(theta, z); });
    }
    throw Unsupported("pop_risk: unsupported family/method");
}

ParamVec pop_grad(const PopulationOracle& o, const ParamVec& theta) {
    if (!theta.allFinite()) throw InvalidInput("pop_grad: non-finite theta");
    if (o.method == PopulationOracle::Method::monte_carlo) return gradient(o.mc_spec, *o.mc_data, theta);
    switch (o.family) {
        case Family::classification: return class_grad(o, theta);
        case Family::robust_regression: return reg_grad(o, theta);
        case Family::gmm2:
            return gmm_mixture_expect(o, ParamVec(ParamVec::Zero(theta.size())),
                                      [&](const ParamVec& z) { return gmm_point_grad(theta, z); });
    }
    throw Unsupported("pop_grad: unsupported family/method");
}

Matrix pop_hessian(const PopulationOracle& o, const ParamVec& theta) {
    if (!theta.allFinite()) throw InvalidInput("pop_hessian: non-finite theta");
    if (o.method == PopulationOracle::Method::monte_carlo) return hessian(o.mc_spec, *o.mc_data, theta);
    switch (o.family) {
        case Family::classification: return class_hess(o, theta);
        case Family::robust_regression: return reg_hess(o, theta);
        case Family::gmm2: {
            const Eigen::Index p = theta.size();
            return gmm_mixture_expect(o, Matrix(Matrix::Zero(p, p)),
                                      [&](const ParamVec& z) { return gmm_point_hess(theta, z); });
        }
    }
    throw Unsupported("pop_hessian: unsupported family/method");
}

Objective make_pop_objective(const PopulationOracle& oracle) {
    Objective obj;
    obj.value = [oracle](const ParamVec& th) { return pop_risk(oracle, th); };
    obj.grad = [oracle](const ParamVec& th) { return pop_grad(oracle, th); };
    obj.hess = [oracle](const ParamVec& th) { return pop_hessian(oracle, th); };
    return obj;
}

GapResult mc_pop_gap(const ModelSpec& spec, const Dataset& data, const PopulationOracle& oracle,
                     const std::vector<ParamVec>& thetas) {
    if (thetas.empty()) throw InvalidInput("mc_pop_gap: empty theta grid");
    if (data.n() == 0) throw InvalidInput("mc_pop_gap: empty dataset");
    if (spec.family != oracle.family) throw Unsupported("mc_pop_gap: family mismatch");
    GapResult out;
    for (const ParamVec& th : thetas) {
        const double ggap = (gradient(spec, data, th) - pop_grad(oracle, th)).norm();
        const double hgap = sym_op_norm(hessian(spec, data, th) - pop_hessian(oracle, th));
        out.sup_grad_gap = std::max(out.sup_grad_gap, ggap);
        out.sup_hess_gap = std::max(out.sup_hess_gap, hgap);
    }
    return out;
}

}  // namespace riskscape
