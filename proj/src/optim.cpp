#include "riskscape/optim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "riskscape/linalg.hpp"

namespace riskscape {

namespace {

bool store_index(int k, const OptConfig& cfg) {
    return k <= cfg.store_every_after || (cfg.store_stride > 0 && k % cfg.store_stride == 0);
}

void push_state(Trajectory& t, int k, const ParamVec& theta, double value, double measure) {
    t.ks.push_back(k);
    t.iterates.push_back(theta);
    t.risks.push_back(value);
    t.grad_norms.push_back(measure);
}

void finalize(Trajectory& t, const Objective& obj, const OptConfig& cfg, int k, const ParamVec& theta,
              double measure_hint) {
    if (t.ks.empty() || t.ks.back() != k) push_state(t, k, theta, obj.value(theta), measure_hint);
    t.final = theta;
    t.iters = k;
    if (std::isfinite(cfg.radius)) t.at_boundary = theta.norm() >= 0.999 * cfg.radius;
}

double composite_value(const Objective& obj, double lambda, const ParamVec& theta) {
    double v = obj.value(theta);
    if (lambda > 0.0) v += lambda * theta.lpNorm<1>();
    return v;
}

ParamVec prox_step(const ParamVec& theta, const ParamVec& g, double h, double lambda, double radius) {
    ParamVec cand = theta - h * g;
    if (lambda > 0.0) cand = soft_threshold(cand, h * lambda);
    if (std::isfinite(radius) && cand.norm() > radius) cand = project_ball(cand, radius);
    return cand;
}

Trajectory first_order_engine(const Objective& obj, const ParamVec& init, const OptConfig& cfg) {
    if (!(cfg.step > 0.0)) throw InvalidInput("optimizer: step must be positive");
    if (cfg.max_iters < 1) throw InvalidInput("optimizer: max_iters must be >= 1");
    if (std::isfinite(cfg.radius) && init.norm() > cfg.radius * (1.0 + 1e-9))
        throw InvalidInput("optimizer: init outside the constraint ball");
    if (!init.allFinite()) throw InvalidInput("optimizer: non-finite init");

    Trajectory traj;
    ParamVec theta = init;
    const double lam = cfg.lambda;

    const auto diverge = [&](int k) {
        traj.final = theta;
        traj.iters = k;
        throw DivergenceError(std::move(traj));
    };

    for (int k = 0; k < cfg.max_iters; ++k) {
        const double value = obj.value(theta);
        if (!std::isfinite(value)) diverge(k);
        const ParamVec g = obj.grad(theta);
        if (!g.allFinite()) diverge(k);
        const double gn = g.norm();

        const ParamVec cand = prox_step(theta, g, cfg.step, lam, cfg.radius);
        const double measure = lam > 0.0 ? (theta - cand).norm() / cfg.step : gn;

        if (store_index(k, cfg)) push_state(traj, k, theta, value, measure);

        if (measure <= cfg.grad_tol * std::max(1.0, std::abs(value))) {
            traj.converged = true;
            traj.reason = StopReason::grad_tolerance;
            finalize(traj, obj, cfg, k, theta, measure);
            return traj;
        }

        ParamVec next = cand;
        if (cfg.allow_halving) {
            const double cur_obj = value + (lam > 0.0 ? lam * theta.lpNorm<1>() : 0.0);
            double h = cfg.step;
            int halved = 0;
            double next_obj = composite_value(obj, lam, next);
            while ((!std::isfinite(next_obj) || next_obj > cur_obj) && halved < cfg.max_halvings) {
                h *= 0.5;
                ++halved;
                next = prox_step(theta, g, h, lam, cfg.radius);
                next_obj = composite_value(obj, lam, next);
            }
            traj.halvings += halved;
            if (!std::isfinite(next_obj) || next_obj > cur_obj) {
                traj.converged = false;
                traj.reason = StopReason::stalled;
                finalize(traj, obj, cfg, k, theta, measure);
                return traj;
            }
        }

        const double move = (next - theta).norm();
        theta = next;
        if (move <= cfg.move_tol * std::max(1.0, theta.norm())) {
            traj.converged = true;
            traj.reason = StopReason::move_tolerance;
            finalize(traj, obj, cfg, k + 1, theta, measure);
            return traj;
        }
    }
    traj.converged = false;
    traj.reason = StopReason::max_iters;
    finalize(traj, obj, cfg, cfg.max_iters, theta, obj.grad(theta).norm());
    return traj;
}

}  // namespace

std::string stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::grad_tolerance: return "tolerance";
        case StopReason::move_tolerance: return "move-tolerance";
        case StopReason::max_iters: return "max-iters";
        case StopReason::stalled: return "stalled";
    }
    return "?";
}

Objective make_objective(const ModelSpec& spec, const Dataset& data) {
    const ModelSpec* sp = &spec;
    const Dataset* dp = &data;
    Objective obj;
    obj.value = [sp, dp](const ParamVec& th) { return risk(*sp, *dp, th); };
    obj.grad = [sp, dp](const ParamVec& th) { return gradient(*sp, *dp, th); };
    obj.hess = [sp, dp](const ParamVec& th) { return hessian(*sp, *dp, th); };
    return obj;
}

Trajectory gd_projected(const Objective& obj, const ParamVec& init, const OptConfig& cfg) {
    OptConfig c = cfg;
    c.lambda = 0.0;
    return first_order_engine(obj, init, c);
}

Trajectory prox_gd(const Objective& obj, const ParamVec& init, const OptConfig& cfg) {
    if (cfg.lambda < 0.0) throw InvalidInput("prox_gd: lambda must be nonnegative");
    return first_order_engine(obj, init, cfg);
}

ParamVec tr_subproblem(const ParamVec& eigenvalues, const Matrix& eigenvectors, const ParamVec& g,
                       double delta) {
    const Eigen::Index p = g.size();
    const ParamVec gbar = eigenvectors.transpose() * g;
    const double lmin = eigenvalues[p - 1];
    const double scale = std::max(1.0, eigenvalues.cwiseAbs().maxCoeff());

    const auto step_norm = [&](double mu) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < p; ++i) {
            const double den = eigenvalues[i] + mu;
            if (den > 0.0) acc += (gbar[i] / den) * (gbar[i] / den);
        }
        return std::sqrt(acc);
    };
    const auto build_step = [&](double mu, bool skip_floor) {
        ParamVec sbar = ParamVec::Zero(p);
        for (Eigen::Index i = 0; i < p; ++i) {
            const double den = eigenvalues[i] + mu;
            if (den > (skip_floor ? 1e-14 * scale : 0.0)) sbar[i] = -gbar[i] / den;
        }
        return ParamVec(eigenvectors * sbar);
    };

    // interior Newton step
    if (lmin > 0.0) {
        if (step_norm(0.0) <= delta) return build_step(0.0, false);
    }

    const double mu_lo = std::max(0.0, -lmin);

    // hard case: gradient orthogonal to the bottom eigenspace and the
    // pseudo-step at mu = -lambda_min is still interior
    bool grad_in_bottom = false;
    for (Eigen::Index i = 0; i < p; ++i)
        if (eigenvalues[i] <= lmin + 1e-12 * scale && std::abs(gbar[i]) > 1e-12 * std::max(1.0, g.norm()))
            grad_in_bottom = true;
    if (!grad_in_bottom) {
        ParamVec s0 = build_step(mu_lo, true);
        const double n0 = s0.norm();
        if (n0 <= delta) {
            const double alpha = std::sqrt(std::max(0.0, delta * delta - n0 * n0));
            return ParamVec(s0 + alpha * eigenvectors.col(p - 1));
        }
    }

    // secular equation: find mu > mu_lo with |s(mu)| = delta
    double lo = mu_lo;
    double hi = std::max(mu_lo + 1e-8 * scale, g.norm() / delta + mu_lo);
    while (step_norm(hi) > delta) hi = 2.0 * hi + scale;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo) || !(mid < hi)) break;
        if (step_norm(mid) > delta)
            lo = mid;
        else
            hi = mid;
    }
    return build_step(0.5 * (lo + hi), false);
}

Trajectory trust_region(const Objective& obj, const ParamVec& init, const OptConfig& cfg) {
    if (!obj.hess) throw Unsupported("trust_region: objective has no Hessian");
    if (!init.allFinite()) throw InvalidInput("trust_region: non-finite init");
    if (cfg.max_iters < 1) throw InvalidInput("trust_region: max_iters must be >= 1");

    Trajectory traj;
    ParamVec theta = init;
    double delta = cfg.tr.initial_radius;

    for (int k = 0; k < cfg.max_iters; ++k) {
        const double value = obj.value(theta);
        const ParamVec g = obj.grad(theta);
        if (!std::isfinite(value) || !g.allFinite()) {
            traj.final = theta;
            traj.iters = k;
            throw DivergenceError(std::move(traj));
        }
        const double gn = g.norm();
        if (store_index(k, cfg)) push_state(traj, k, theta, value, gn);

        const EigenDecomp eig = sym_eigen(obj.hess(theta));
        const double lmax_abs = std::max(1.0, eig.eigenvalues.cwiseAbs().maxCoeff());
        const double lmin = eig.eigenvalues[eig.eigenvalues.size() - 1];

        if (gn <= cfg.grad_tol * std::max(1.0, std::abs(value)) &&
            lmin >= -cfg.tr.curvature_tol * lmax_abs) {
            traj.converged = true;
            traj.reason = StopReason::grad_tolerance;
            traj.second_order = true;
            finalize(traj, obj, cfg, k, theta, gn);
            return traj;
        }

        const ParamVec s = tr_subproblem(eig.eigenvalues, eig.eigenvectors, g, delta);
        const double pred = -(g.dot(s) + 0.5 * s.dot(eig.reconstruct() * s));
        if (!(pred > 0.0)) {
            delta *= cfg.tr.shrink;
            if (delta < 1e-16) {
                traj.converged = false;
                traj.reason = StopReason::stalled;
                finalize(traj, obj, cfg, k, theta, gn);
                return traj;
            }
            continue;
        }
        const ParamVec cand = theta + s;
        const double cand_value = obj.value(cand);
        const double rho = std::isfinite(cand_value) ? (value - cand_value) / pred : -1.0;
        if (rho >= cfg.tr.eta_accept) {
            const double move = s.norm();
            theta = cand;
            if (rho >= 0.75 && move >= 0.99 * delta)
                delta = std::min(cfg.tr.grow * delta, cfg.tr.max_radius);
            if (move <= cfg.move_tol * std::max(1.0, theta.norm())) {
                traj.converged = true;
                traj.reason = StopReason::move_tolerance;
                finalize(traj, obj, cfg, k + 1, theta, obj.grad(theta).norm());
                return traj;
            }
        } else {
            delta *= cfg.tr.shrink;
            if (delta < 1e-16) {
                traj.converged = false;
                traj.reason = StopReason::stalled;
                finalize(traj, obj, cfg, k, theta, gn);
                return traj;
            }
        }
    }
    traj.converged = false;
    traj.reason = StopReason::max_iters;
    finalize(traj, obj, cfg, cfg.max_iters, theta, obj.grad(theta).norm());
    return traj;
}

Trajectory gd_projected(const ModelSpec& spec, const Dataset& data, const ParamVec& init, const OptConfig& cfg) {
    return gd_projected(make_objective(spec, data), init, cfg);
}

Trajectory prox_gd(const ModelSpec& spec, const Dataset& data, const ParamVec& init, const OptConfig& cfg) {
    return prox_gd(make_objective(spec, data), init, cfg);
}

Trajectory trust_region(const ModelSpec& spec, const Dataset& data, const ParamVec& init, const OptConfig& cfg) {
    return trust_region(make_objective(spec, data), init, cfg);
}

Trajectory run_optimizer(const ModelSpec& spec, const Dataset& data, const ParamVec& init, const OptConfig& cfg) {
    switch (cfg.method) {
        case Method::gd: return gd_projected(spec, data, init, cfg);
        case Method::proxgd: return prox_gd(spec, data, init, cfg);
        case Method::trust_region: return trust_region(spec, data, init, cfg);
    }
    throw InvalidInput("run_optimizer: unknown method");
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const std::optional<ParamVec>& reference) {
    std::ofstream os(path);
    if (!os) throw InvalidInput("cannot open for writing: " + path);
    const ParamVec& ref = reference ? *reference : traj.final;
    os << "k,risk,grad_norm,dist_to_reference\n";
    char buf[128];
    for (std::size_t i = 0; i < traj.ks.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", traj.ks[i], traj.risks[i],
                      traj.grad_norms[i], (traj.iterates[i] - ref).norm());
        os << buf;
    }
    if (!os) throw InvalidInput("write failed: " + path);
}

}  // namespace riskscape
