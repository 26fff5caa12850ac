#include "riskscape/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "riskscape/linalg.hpp"
#include "riskscape/parallel.hpp"

namespace riskscape {

namespace {

ParamVec uniform_in_ball(const BallRegion& region, Rng& rng) {
    const auto p = region.center.size();
    const ParamVec dir = rng.unit_vector(p);
    const double u = rng.uniform01();
    const double rad = region.radius * std::pow(u, 1.0 / static_cast<double>(p));
    return region.center + rad * dir;
}

struct NewtonResult {
    ParamVec x;
    double grad_norm = 0.0;
    bool converged = false;
};

NewtonResult newton_polish(const Objective& obj, const ParamVec& start, const BallRegion& region,
                           const CritFindOptions& opt) {
    NewtonResult res;
    ParamVec x = start;
    ParamVec g = obj.grad(x);
    if (!g.allFinite()) return res;
    double gn = g.norm();
    for (int it = 0; it < opt.max_newton_iters && gn > opt.grad_tol; ++it) {
        const EigenDecomp eig = sym_eigen(obj.hess(x));
        const double scale = std::max(1.0, eig.eigenvalues.cwiseAbs().maxCoeff());
        const double floor = 1e-10 * scale;
        const ParamVec gbar = eig.eigenvectors.transpose() * g;
        ParamVec sbar(gbar.size());
        for (Eigen::Index i = 0; i < gbar.size(); ++i) {
            double lam = eig.eigenvalues[i];
            const double mag = std::max(std::abs(lam), floor);
            sbar[i] = -gbar[i] / std::copysign(mag, lam == 0.0 ? 1.0 : lam);
        }
        ParamVec s = eig.eigenvectors * sbar;
        // keep steps commensurate with the search region
        const double max_step = region.radius;
        if (s.norm() > max_step) s *= max_step / s.norm();

        double t = 1.0;
        bool improved = false;
        for (int bt = 0; bt < 40; ++bt) {
            const ParamVec cand = x + t * s;
            const ParamVec gc = obj.grad(cand);
            if (gc.allFinite() && gc.norm() <= (1.0 - 1e-4 * t) * gn) {
                x = cand;
                g = gc;
                gn = g.norm();
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if (!improved) return res;
        if ((x - region.center).norm() > opt.wander_factor * region.radius) return res;
    }
    res.x = x;
    res.grad_norm = gn;
    res.converged = gn <= opt.grad_tol;
    return res;
}

CriticalPoint classify_point(const Objective& obj, const ParamVec& x, double gn, double deg_tol) {
    CriticalPoint cp;
    cp.location = x;
    cp.value = obj.value(x);
    cp.grad_norm = gn;
    const EigenDecomp eig = sym_eigen(obj.hess(x));
    cp.eigenvalues = eig.eigenvalues;
    const double scale = std::max(1.0, eig.eigenvalues.cwiseAbs().maxCoeff());
    const double tol = deg_tol * scale;
    bool degenerate = false;
    int index = 0;
    for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
        if (std::abs(eig.eigenvalues[i]) <= tol) degenerate = true;
        if (eig.eigenvalues[i] < -tol) ++index;
    }
    cp.index = index;
    if (degenerate)
        cp.kind = CriticalPoint::Kind::degenerate;
    else if (index == 0)
        cp.kind = CriticalPoint::Kind::minimum;
    else if (index == eig.eigenvalues.size())
        cp.kind = CriticalPoint::Kind::maximum;
    else
        cp.kind = CriticalPoint::Kind::saddle;
    return cp;
}

}  // namespace

std::string kind_name(CriticalPoint::Kind k) {
    switch (k) {
        case CriticalPoint::Kind::minimum: return "minimum";
        case CriticalPoint::Kind::saddle: return "saddle";
        case CriticalPoint::Kind::maximum: return "maximum";
        case CriticalPoint::Kind::degenerate: return "degenerate";
    }
    return "?";
}

std::vector<CriticalPoint> find_critical_points(const Objective& obj, const BallRegion& region,
                                                int n_starts, std::uint64_t seed,
                                                const CritFindOptions& opt) {
    if (!(region.radius > 0.0)) throw InvalidInput("find_critical_points: radius must be positive");
    if (n_starts < 1) throw InvalidInput("find_critical_points: n_starts must be >= 1");
    if (!obj.hess) throw Unsupported("find_critical_points: objective has no Hessian");

    std::vector<NewtonResult> results(static_cast<std::size_t>(n_starts));
    parallel_jobs(static_cast<std::size_t>(n_starts), [&](std::size_t j) {
        Rng rng(derive_seed(seed, j));
        const ParamVec start = uniform_in_ball(region, rng);
        results[j] = newton_polish(obj, start, region, opt);
    });

    std::vector<CriticalPoint> kept;
    const double dedup = opt.dedup_tol > 0.0 ? opt.dedup_tol : 1e-6 * region.radius;
    std::vector<const NewtonResult*> converged;
    for (const auto& r : results)
        if (r.converged && (r.x - region.center).norm() <= region.radius) converged.push_back(&r);
    std::vector<CriticalPoint> classified;
    classified.reserve(converged.size());
    for (const auto* r : converged) classified.push_back(classify_point(obj, r->x, r->grad_norm, opt.degeneracy_tol));
    std::stable_sort(classified.begin(), classified.end(),
                     [](const CriticalPoint& a, const CriticalPoint& b) { return a.value < b.value; });
    for (const auto& cp : classified) {
        bool dup = false;
        for (const auto& k : kept)
            if ((cp.location - k.location).norm() < dedup) dup = true;
        if (!dup) kept.push_back(cp);
    }
    return kept;
}

CriticalPoint polish_critical_point(const Objective& obj, const ParamVec& start, const CritFindOptions& opt) {
    BallRegion region{start, std::max(1.0, start.norm())};
    const NewtonResult r = newton_polish(obj, start, region, opt);
    if (!r.converged) throw EvalError("polish_critical_point: Newton did not converge");
    return classify_point(obj, r.x, r.grad_norm, opt.degeneracy_tol);
}

MorseCertificate certify_strong_morse(const Objective& obj, const BallRegion& region,
                                      const GridSpec& grid, double epsilon, double eta) {
    if (!(region.radius > 0.0)) throw InvalidInput("certify_strong_morse: radius must be positive");
    if (!obj.hess) throw Unsupported("certify_strong_morse: objective has no Hessian");
    const auto d = region.center.size();

    std::vector<ParamVec> interior;
    std::vector<ParamVec> boundary;
    Rng rng(derive_seed(grid.seed, 0xb07du));

    if (d <= 3) {
        int per_axis = grid.per_axis;
        if (per_axis <= 0) {
            per_axis = static_cast<int>(std::floor(std::pow(static_cast<double>(grid.budget),
                                                            1.0 / static_cast<double>(d))));
            per_axis = std::clamp(per_axis, 3, 151);
        }
        double total = std::pow(static_cast<double>(per_axis), static_cast<double>(d));
        if (total > static_cast<double>(grid.budget))
            throw InvalidInput("certify_strong_morse: grid exceeds the point budget");
        std::vector<double> axis(static_cast<std::size_t>(per_axis));
        for (int i = 0; i < per_axis; ++i)
            axis[static_cast<std::size_t>(i)] =
                -region.radius + 2.0 * region.radius * (i + 0.5) / per_axis;
        ParamVec x(d);
        const std::function<void(Eigen::Index)> rec = [&](Eigen::Index dim) {
            if (dim == d) {
                if (x.norm() <= region.radius * (1.0 - 1e-9)) interior.push_back(region.center + x);
                return;
            }
            for (double v : axis) {
                x[dim] = v;
                rec(dim + 1);
            }
        };
        rec(0);
        long nb = grid.boundary > 0 ? grid.boundary : std::max<long>(16, per_axis * 2);
        if (d == 1) {
            boundary.push_back(region.center + ParamVec::Constant(1, region.radius));
            boundary.push_back(region.center - ParamVec::Constant(1, region.radius));
        } else {
            for (long i = 0; i < nb; ++i)
                boundary.push_back(region.center + region.radius * rng.unit_vector(d));
        }
    } else {
        const long n_int = grid.budget * 9 / 10;
        const long n_bnd = grid.boundary > 0 ? grid.boundary : grid.budget - n_int;
        if (n_int + n_bnd > grid.budget)
            throw InvalidInput("certify_strong_morse: grid exceeds the point budget");
        // radius strata form a latin hypercube on the radial coordinate
        std::vector<long> perm(static_cast<std::size_t>(n_int));
        for (long i = 0; i < n_int; ++i) perm[static_cast<std::size_t>(i)] = i;
        for (long i = n_int - 1; i > 0; --i)
            std::swap(perm[static_cast<std::size_t>(i)],
                      perm[static_cast<std::size_t>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)))]);
        for (long i = 0; i < n_int; ++i) {
            const double strat = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + rng.uniform01()) /
                                 static_cast<double>(n_int);
            const double rad = region.radius * std::pow(strat, 1.0 / static_cast<double>(d));
            interior.push_back(region.center + rad * rng.unit_vector(d));
        }
        for (long i = 0; i < n_bnd; ++i)
            boundary.push_back(region.center + region.radius * rng.unit_vector(d));
    }

    MorseCertificate cert;
    cert.region = region;
    cert.grid = grid;
    cert.epsilon = epsilon;
    cert.eta = eta;
    cert.points_checked = static_cast<long>(interior.size() + boundary.size());

    std::vector<char> violation(interior.size() + boundary.size(), 0);
    parallel_jobs(interior.size() + boundary.size(), [&](std::size_t i) {
        const bool is_boundary = i >= interior.size();
        const ParamVec& x = is_boundary ? boundary[i - interior.size()] : interior[i];
        const double gn = obj.grad(x).norm();
        if (is_boundary) {
            if (!(gn > epsilon)) violation[i] = 1;
            return;
        }
        if (gn <= epsilon) {
            const EigenDecomp eig = sym_eigen(obj.hess(x));
            const double min_abs = eig.eigenvalues.cwiseAbs().minCoeff();
            if (min_abs < eta) violation[i] = 1;
        }
    });
    for (std::size_t i = 0; i < violation.size(); ++i) {
        if (!violation[i]) continue;
        const ParamVec& x = i >= interior.size() ? boundary[i - interior.size()] : interior[i];
        if (cert.witnesses.size() < 1000) cert.witnesses.push_back(x);
    }
    cert.holds = std::all_of(violation.begin(), violation.end(), [](char v) { return v == 0; });
    return cert;
}

Pairing match_critical_points(const std::vector<CriticalPoint>& a, const std::vector<CriticalPoint>& b) {
    struct Cand {
        double dist;
        int ia, ib;
    };
    std::vector<Cand> cands;
    cands.reserve(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            cands.push_back({(a[i].location - b[j].location).norm(), static_cast<int>(i), static_cast<int>(j)});
    std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
        if (x.dist != y.dist) return x.dist < y.dist;
        if (x.ia != y.ia) return x.ia < y.ia;
        return x.ib < y.ib;
    });
    Pairing out;
    std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
    for (const Cand& c : cands) {
        if (used_a[static_cast<std::size_t>(c.ia)] || used_b[static_cast<std::size_t>(c.ib)]) continue;
        used_a[static_cast<std::size_t>(c.ia)] = 1;
        used_b[static_cast<std::size_t>(c.ib)] = 1;
        out.matches.push_back({c.ia, c.ib, c.dist,
                               a[static_cast<std::size_t>(c.ia)].index == b[static_cast<std::size_t>(c.ib)].index});
    }
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!used_a[i]) out.unmatched_a.push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < b.size(); ++j)
        if (!used_b[j]) out.unmatched_b.push_back(static_cast<int>(j));
    return out;
}

InitLaw InitLaw::gaussian(double scale) {
    InitLaw law;
    law.kind = Kind::gaussian_scaled;
    law.variance_scale = scale;
    return law;
}

InitLaw InitLaw::box(ParamVec center, double halfwidth) {
    InitLaw law;
    law.kind = Kind::uniform_box;
    law.box_center = std::move(center);
    law.box_halfwidth = halfwidth;
    return law;
}

ParamVec draw_init(const InitLaw& law, Eigen::Index p, Eigen::Index d, Rng& rng) {
    switch (law.kind) {
        case InitLaw::Kind::gaussian_scaled: {
            const double sd = std::sqrt(law.variance_scale / static_cast<double>(d));
            return sd * rng.normal_vector(p);
        }
        case InitLaw::Kind::uniform_box: {
            if (law.box_center.size() != p) throw InvalidInput("draw_init: box center dimension mismatch");
            ParamVec v(p);
            for (Eigen::Index i = 0; i < p; ++i)
                v[i] = law.box_center[i] + law.box_halfwidth * (2.0 * rng.uniform01() - 1.0);
            return v;
        }
    }
    throw InvalidInput("draw_init: unknown init law");
}

namespace {

// random inits land in the constraint ball the way the first projected step
// would put them there
ParamVec draw_feasible_init(const InitLaw& law, Eigen::Index p, Eigen::Index d, const OptConfig& cfg,
                            Rng& rng) {
    ParamVec init = draw_init(law, p, d, rng);
    if (std::isfinite(cfg.radius) && init.norm() > cfg.radius) init = project_ball(init, cfg.radius);
    return init;
}

}  // namespace

BasinStats basin_spread(const ModelSpec& spec, const Dataset& data, const OptConfig& cfg,
                        const InitLaw& law, int n_inits, std::uint64_t seed, double success_eps) {
    if (n_inits < 2) throw InvalidInput("basin_spread: n_inits must be >= 2");
    BasinStats stats;
    stats.n_inits = n_inits;
    const Eigen::Index p = spec.param_dim(data.dim());
    std::vector<ParamVec> finals(static_cast<std::size_t>(n_inits));
    std::vector<char> failed(static_cast<std::size_t>(n_inits), 0);
    for (int j = 0; j < n_inits; ++j) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
        const ParamVec init = draw_feasible_init(law, p, data.dim(), cfg, rng);
        try {
            finals[static_cast<std::size_t>(j)] = run_optimizer(spec, data, init, cfg).final;
        } catch (const DivergenceError&) {
            failed[static_cast<std::size_t>(j)] = 1;
        }
    }
    for (int j = 0; j < n_inits; ++j) {
        if (failed[static_cast<std::size_t>(j)]) {
            ++stats.failures;
            continue;
        }
        stats.finals.push_back(finals[static_cast<std::size_t>(j)]);
    }
    if (stats.failures > 0 || stats.finals.size() < 2) {
        stats.spread = std::numeric_limits<double>::infinity();
        stats.success = false;
        return stats;
    }
    ParamVec mean = ParamVec::Zero(p);
    for (const auto& f : stats.finals) mean += f;
    mean /= static_cast<double>(stats.finals.size());
    double trace = 0.0;
    for (const auto& f : stats.finals) trace += (f - mean).squaredNorm();
    trace /= static_cast<double>(stats.finals.size() - 1);
    stats.spread = std::sqrt(trace);
    stats.success = stats.spread <= success_eps;
    return stats;
}

SpreadCurve init_spread_curve(const ModelSpec& spec, const Dataset& data, const OptConfig& cfg,
                              const InitLaw& law, int n_inits, std::uint64_t seed) {
    if (n_inits < 2) throw InvalidInput("init_spread_curve: n_inits must be >= 2");
    OptConfig full = cfg;
    full.store_every_after = cfg.max_iters + 1;  // shared iteration grid needs every iterate
    const Eigen::Index p = spec.param_dim(data.dim());

    std::vector<Trajectory> trajs(static_cast<std::size_t>(n_inits));
    parallel_jobs(static_cast<std::size_t>(n_inits), [&](std::size_t j) {
        Rng rng(derive_seed(seed, j));
        try {
            const ParamVec init = draw_feasible_init(law, p, data.dim(), full, rng);
            trajs[j] = run_optimizer(spec, data, init, full);
        } catch (const DivergenceError& e) {
            trajs[j] = e.partial;
        } catch (...) {
            // leave the slot empty; exceptions must not cross the omp region
        }
    });

    int kmax = 0;
    for (const auto& t : trajs)
        if (!t.ks.empty()) kmax = std::max(kmax, t.ks.back());
    SpreadCurve curve;
    for (int k = 0; k <= kmax; ++k) {
        ParamVec mean = ParamVec::Zero(p);
        std::vector<const ParamVec*> pts;
        for (const auto& t : trajs) {
            if (t.iterates.empty()) continue;
            const auto idx = static_cast<std::size_t>(
                std::min<long>(k, static_cast<long>(t.iterates.size()) - 1));
            pts.push_back(&t.iterates[idx]);
        }
        if (pts.size() < 2) break;
        for (const auto* q : pts) mean += *q;
        mean /= static_cast<double>(pts.size());
        double trace = 0.0;
        for (const auto* q : pts) trace += (*q - mean).squaredNorm();
        trace /= static_cast<double>(pts.size() - 1);
        curve.ks.push_back(k);
        curve.stds.push_back(std::sqrt(trace));
    }
    return curve;
}

void write_spread_curve_csv(const std::string& path, const SpreadCurve& curve) {
    std::ofstream os(path);
    if (!os) throw InvalidInput("cannot open for writing: " + path);
    os << "k,std\n";
    char buf[64];
    for (std::size_t i = 0; i < curve.ks.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g\n", curve.ks[i], curve.stds[i]);
        os << buf;
    }
}

LandscapeConstants measure_landscape_constants(const Objective& obj, const ParamVec& theta0, double r,
                                               double eps0, int n_grid, std::uint64_t seed) {
    if (!(r > 0.0) || !(eps0 > 0.0)) throw InvalidInput("measure_landscape_constants: bad radii");
    LandscapeConstants c;
    c.eps0 = eps0;
    c.kappa_lower = std::numeric_limits<double>::infinity();
    c.kappa_upper = 0.0;
    c.L_lower = std::numeric_limits<double>::infinity();
    c.L_upper = 0.0;
    c.T0 = std::numeric_limits<double>::infinity();
    Rng rng(derive_seed(seed, 0xc047u));
    const auto p = theta0.size();
    const BallRegion inner{theta0, eps0};
    const BallRegion outer{ParamVec::Zero(p), r};
    for (int i = 0; i < n_grid; ++i) {
        const ParamVec th_in = uniform_in_ball(inner, rng);
        c.kappa_lower = std::min(c.kappa_lower, lambda_min(obj.hess(th_in)));
        const ParamVec th = uniform_in_ball(outer, rng);
        const ParamVec g = obj.grad(th);
        const double gn = g.norm();
        c.kappa_upper = std::max(c.kappa_upper, sym_op_norm(obj.hess(th)));
        c.L_upper = std::max(c.L_upper, gn);
        const double dist = (th - theta0).norm();
        if (dist > eps0) {
            c.L_lower = std::min(c.L_lower, gn);
            c.T0 = std::min(c.T0, (th - theta0).dot(g) / (dist * dist));
        }
    }
    return c;
}

namespace {

nlohmann::json vec_to_json(const ParamVec& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

nlohmann::json cert_to_json(const MorseCertificate& cert) {
    nlohmann::json j;
    j["region"] = {{"center", vec_to_json(cert.region.center)}, {"radius", cert.region.radius}};
    j["grid"] = {{"budget", cert.grid.budget},
                 {"per_axis", cert.grid.per_axis},
                 {"boundary", cert.grid.boundary},
                 {"seed", cert.grid.seed}};
    j["epsilon"] = cert.epsilon;
    j["eta"] = cert.eta;
    j["holds"] = cert.holds;
    j["points_checked"] = cert.points_checked;
    nlohmann::json w = nlohmann::json::array();
    for (const auto& x : cert.witnesses) w.push_back(vec_to_json(x));
    j["witnesses"] = w;
    return j;
}

}  // namespace

void write_landscape_report(const std::string& path, const LandscapeReport& report) {
    nlohmann::json j;
    j["schema_version"] = 1;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& cp : report.critical_points) {
        pts.push_back({{"location", vec_to_json(cp.location)},
                       {"value", cp.value},
                       {"grad_norm", cp.grad_norm},
                       {"eigenvalues", vec_to_json(cp.eigenvalues)},
                       {"index", cp.index},
                       {"kind", kind_name(cp.kind)}});
    }
    j["criticalpoints"] = pts;
    if (report.has_pairing) {
        nlohmann::json m = nlohmann::json::array();
        for (const auto& match : report.pairing.matches)
            m.push_back({{"ia", match.ia},
                         {"ib", match.ib},
                         {"distance", match.distance},
                         {"index_agree", match.index_agree}});
        j["pairing"] = {{"matches", m},
                        {"unmatched_a", report.pairing.unmatched_a},
                        {"unmatched_b", report.pairing.unmatched_b}};
    }
    if (report.has_constants) {
        j["constants"] = {{"eps0", report.constants.eps0},
                          {"kappa_lower", report.constants.kappa_lower},
                          {"kappa_upper", report.constants.kappa_upper},
                          {"L_lower", report.constants.L_lower},
                          {"L_upper", report.constants.L_upper},
                          {"T0", report.constants.T0}};
    }
    if (report.has_certificate) j["certificate"] = cert_to_json(report.certificate);
    std::ofstream os(path);
    if (!os) throw InvalidInput("cannot open for writing: " + path);
    os << j.dump(2) << '\n';
}

}  // namespace riskscape
