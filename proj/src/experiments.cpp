#include "riskscape/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <Eigen/Dense>

#include "riskscape/datagen.hpp"
#include "riskscape/landscape.hpp"
#include "riskscape/optim.hpp"
#include "riskscape/parallel.hpp"
#include "riskscape/linalg.hpp"
#include "riskscape/population.hpp"

namespace riskscape {

namespace {

namespace fs = std::filesystem;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvFile {
public:
    CsvFile(const std::string& path, const std::string& header) : os_(path), path_(path) {
        if (!os_) throw InvalidInput("cannot open for writing: " + path);
        os_ << header << '\n';
    }
    template <class... Ts>
    void row(const Ts&... cells) {
        bool first = true;
        ((os_ << (first ? "" : ","), first = false, write_cell(cells)), ...);
        os_ << '\n';
    }
    const std::string& path() const { return path_; }

private:
    void write_cell(double v) { os_ << fmt(v); }
    void write_cell(int v) { os_ << v; }
    void write_cell(long v) { os_ << v; }
    void write_cell(const std::string& v) { os_ << v; }
    void write_cell(const char* v) { os_ << v; }
    std::ofstream os_;
    std::string path_;
};

struct Ctx {
    std::string out_dir;
    std::string id;
    std::uint64_t master_seed = 0;
    std::uint64_t tag = 0;
    Json cfg;
    std::vector<std::string> files;
    Json manifest_extra = Json::object();
    long n_jobs = 0;
    long n_failures = 0;

    std::string path(const std::string& name) const { return out_dir + "/" + name; }
    std::uint64_t job_seed(std::uint64_t point, std::uint64_t instance) const {
        return derive_seed(master_seed, tag, point, instance);
    }
};

double jget(const Json& j, const char* key) { return j.at(key).get<double>(); }
int jgeti(const Json& j, const char* key) { return j.at(key).get<int>(); }

std::vector<double> jvec(const Json& j, const char* key) {
    std::vector<double> out;
    for (const auto& v : j.at(key)) out.push_back(v.get<double>());
    if (out.empty()) throw InvalidInput(std::string("experiment config: empty grid ") + key);
    return out;
}

void require_positive(const std::vector<double>& xs, const char* key) {
    for (double x : xs)
        if (!(x > 0.0)) throw InvalidInput(std::string("experiment config: non-positive value in ") + key);
}

// runs fn(i) for every job, capturing failures instead of aborting the sweep
template <class Fn>
long run_jobs(std::size_t n, Fn&& fn) {
    std::vector<char> failed(n, 0);
    parallel_jobs(n, [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            failed[i] = 1;
        }
    });
    return std::count(failed.begin(), failed.end(), 1);
}

// ---------- protocol pieces ----------

struct ClassInstance {
    ModelSpec spec;
    Dataset data;
    ParamVec theta0;
};

ClassInstance make_class_instance(Eigen::Index n, Eigen::Index d, double theta0_norm, std::uint64_t seed) {
    GenConfig g;
    g.family = Family::classification;
    g.n = n;
    g.d = d;
    g.theta0 = Theta0Spec::random_norm(theta0_norm);
    g.seed = seed;
    ClassInstance inst;
    auto [data, th0] = gen_classification(g);
    inst.data = std::move(data);
    inst.theta0 = th0;
    inst.spec.family = Family::classification;
    inst.spec.activation = Activation::logistic();
    inst.spec.radius = 3.0 * theta0_norm;
    inst.spec.theta0 = th0;
    inst.spec.validate();
    return inst;
}

OptConfig class_gd_config(const Json& cfg) {
    OptConfig oc;
    oc.method = Method::gd;
    oc.step = jget(cfg, "h");
    oc.max_iters = jgeti(cfg, "kmax");
    oc.grad_tol = jget(cfg, "grad_tol");
    oc.allow_halving = false;  // classification runs use the fixed step
    return oc;
}

// distance-to-reference series padded to kmax with the final value
std::vector<double> distance_series(const Trajectory& traj, const ParamVec& ref, int kmax) {
    std::vector<double> out(static_cast<std::size_t>(kmax) + 1,
                            (traj.final - ref).norm());
    for (std::size_t i = 0; i < traj.ks.size(); ++i) {
        const int k = traj.ks[i];
        if (k <= kmax) out[static_cast<std::size_t>(k)] = (traj.iterates[i] - ref).norm();
    }
    // forward-fill gaps (strided storage never occurs here: store_every_after = kmax)
    return out;
}

// ---------- fig3a ----------

void run_fig3a(Ctx& ctx) {
    const auto& cfg = ctx.cfg;
    const auto d_list = jvec(cfg, "d");
    const auto ratio_list = jvec(cfg, "ratio");
    require_positive(d_list, "d");
    require_positive(ratio_list, "ratio");
    const int instances = jgeti(cfg, "instances");
    const int inits = jgeti(cfg, "inits");
    const double theta0_norm = jget(cfg, "theta0_norm");
    const double success_eps = jget(cfg, "success_eps");

    struct Point {
        Eigen::Index d, n;
        double ratio;
    };
    std::vector<Point> points;
    for (double d : d_list)
        for (double ratio : ratio_list) {
            const auto dd = static_cast<Eigen::Index>(d);
            const auto n = std::max<Eigen::Index>(
                4, static_cast<Eigen::Index>(std::lround(ratio * d * std::log(d))));
            points.push_back({dd, n, ratio});
        }

    std::vector<double> success(points.size() * static_cast<std::size_t>(instances), 0.0);
    Json seeds = Json::array();
    for (std::size_t pt = 0; pt < points.size(); ++pt) {
        Json row = Json::array();
        for (int i = 0; i < instances; ++i) row.push_back(ctx.job_seed(pt, static_cast<std::uint64_t>(i)));
        seeds.push_back(row);
    }
    ctx.manifest_extra["instance_seeds"] = seeds;

    ctx.n_jobs = static_cast<long>(success.size());
    ctx.n_failures = run_jobs(success.size(), [&](std::size_t j) {
        const std::size_t pt = j / static_cast<std::size_t>(instances);
        const int inst = static_cast<int>(j % static_cast<std::size_t>(instances));
        const Point& P = points[pt];
        const std::uint64_t seed = ctx.job_seed(pt, static_cast<std::uint64_t>(inst));
        ClassInstance ci = make_class_instance(P.n, P.d, theta0_norm, seed);
        OptConfig oc = class_gd_config(cfg);
        oc.radius = ci.spec.radius;
        const BasinStats st = basin_spread(ci.spec, ci.data, oc, InitLaw::gaussian(1.0), inits,
                                           derive_seed(seed, 0x1717u), success_eps);
        success[j] = st.success ? 1.0 : 0.0;
    });

    CsvFile out(ctx.path("fig3a_success.csv"), "d,ratio,n,success_rate,success_rate_smooth,n_instances");
    std::size_t pt = 0;
    for (double d : d_list) {
        std::vector<double> rates;
        for (std::size_t r = 0; r < ratio_list.size(); ++r) {
            const std::size_t base = (pt + r) * static_cast<std::size_t>(instances);
            double acc = 0.0;
            for (int i = 0; i < instances; ++i) acc += success[base + static_cast<std::size_t>(i)];
            rates.push_back(acc / instances);
        }
        const auto smooth = moving_average3(rates);
        for (std::size_t r = 0; r < ratio_list.size(); ++r)
            out.row(static_cast<Eigen::Index>(d), ratio_list[r], points[pt + r].n, rates[r], smooth[r],
                    instances);
        pt += ratio_list.size();
    }
    ctx.files.push_back(out.path());
}

// ---------- fig3b ----------

void run_fig3b(Ctx& ctx) {
    const auto& cfg = ctx.cfg;
    const auto d_list = jvec(cfg, "d");
    const auto nod_list = jvec(cfg, "n_over_d");
    require_positive(d_list, "d");
    require_positive(nod_list, "n_over_d");
    const int reps = jgeti(cfg, "reps");
    const double theta0_norm = jget(cfg, "theta0_norm");

    struct Point {
        Eigen::Index d, n;
        double nod;
    };
    std::vector<Point> points;
    for (double d : d_list)
        for (double nod : nod_list)
            points.push_back({static_cast<Eigen::Index>(d),
                              static_cast<Eigen::Index>(std::lround(nod * d)), nod});

    std::vector<double> errors(points.size() * static_cast<std::size_t>(reps), 0.0);
    ctx.n_jobs = static_cast<long>(errors.size());
    ctx.n_failures = run_jobs(errors.size(), [&](std::size_t j) {
        const std::size_t pt = j / static_cast<std::size_t>(reps);
        const auto rep = static_cast<std::uint64_t>(j % static_cast<std::size_t>(reps));
        const Point& P = points[pt];
        ClassInstance ci = make_class_instance(P.n, P.d, theta0_norm, ctx.job_seed(pt, rep));
        OptConfig oc = class_gd_config(cfg);
        oc.radius = ci.spec.radius;
        Rng rng(derive_seed(ctx.job_seed(pt, rep), 0x111du));
        const ParamVec init = draw_init(InitLaw::gaussian(1.0), P.d, P.d, rng);
        const Trajectory t = gd_projected(ci.spec, ci.data, init, oc);
        errors[j] = (t.final - ci.theta0).norm();
    });

    CsvFile out(ctx.path("fig3b_error.csv"), "d,n_over_d,n,mean_error,std_error,n_reps");
    for (std::size_t pt = 0; pt < points.size(); ++pt) {
        double mean = 0.0, sq = 0.0;
        for (int r = 0; r < reps; ++r) mean += errors[pt * reps + static_cast<std::size_t>(r)];
        mean /= reps;
        for (int r = 0; r < reps; ++r) {
            const double e = errors[pt * reps + static_cast<std::size_t>(r)] - mean;
            sq += e * e;
        }
        const double sd = reps > 1 ? std::sqrt(sq / (reps - 1)) : 0.0;
        out.row(points[pt].d, points[pt].nod, points[pt].n, mean, sd, reps);
    }
    ctx.files.push_back(out.path());
}

// ---------- fig4a / fig4b / fig6 common: per-iterate distance curves ----------

struct CurveJobResult {
    std::vector<double> dist;  // indexed by k
};

void run_fig4a(Ctx& ctx) {
    const auto& cfg = ctx.cfg;
    const auto d_list = jvec(cfg, "d");
    const int reps = jgeti(cfg, "reps");
    const double nod = jget(cfg, "n_over_d");
    const double theta0_norm = jget(cfg, "theta0_norm");
    const int kmax = jgeti(cfg, "kmax");

    std::vector<CurveJobResult> results(d_list.size() * static_cast<std::size_t>(reps));
    ctx.n_jobs = static_cast<long>(results.size());
    ctx.n_failures = run_jobs(results.size(), [&](std::size_t j) {
        const std::size_t pt = j / static_cast<std::size_t>(reps);
        const auto rep = static_cast<std::uint64_t>(j % static_cast<std::size_t>(reps));
        const auto d = static_cast<Eigen::Index>(d_list[pt]);
        const auto n = static_cast<Eigen::Index>(std::lround(nod * static_cast<double>(d)));
        ClassInstance ci = make_class_instance(n, d, theta0_norm, ctx.job_seed(pt, rep));
        OptConfig oc = class_gd_config(cfg);
        oc.radius = ci.spec.radius;
        oc.max_iters = kmax;
        oc.grad_tol = 0.0;
        oc.move_tol = 0.0;
        oc.store_every_after = kmax + 1;
        Rng rng(derive_seed(ctx.job_seed(pt, rep), 0x111du));
        const ParamVec init = draw_init(InitLaw::gaussian(1.0), d, d, rng);
        const Trajectory t = gd_projected(ci.spec, ci.data, init, oc);
        results[j].dist = distance_series(t, t.final, kmax);
    });

    CsvFile out(ctx.path("fig4a_convergence.csv"), "d,k,dist,n_reps");
    for (std::size_t pt = 0; pt < d_list.size(); ++pt) {
        for (int k = 0; k <= kmax; ++k) {
            std::vector<double> vals;
            for (int r = 0; r < reps; ++r) {
                const auto& res = results[pt * reps + static_cast<std::size_t>(r)];
                if (!res.dist.empty()) vals.push_back(res.dist[static_cast<std::size_t>(k)]);
            }
            if (vals.empty()) continue;
            out.row(static_cast<Eigen::Index>(d_list[pt]), k, quantile_trimmed_mean(vals),
                    static_cast<long>(vals.size()));
        }
    }
    ctx.files.push_back(out.path());
}

void run_fig4b(Ctx& ctx) {
    const auto& cfg = ctx.cfg;
    const auto d_list = jvec(cfg, "d");
    const auto nod_list = jvec(cfg, "n_over_d");
    const int reps = jgeti(cfg, "reps");
    const double theta0_norm = jget(cfg, "theta0_norm");
    const int kmax = jgeti(cfg, "kmax");
    const double target = jget(cfg, "target");

    struct Point {
        Eigen::Index d, n;
        double nod;
    };
    std::vector<Point> points;
    for (double d : d_list)
        for (double nod : nod_list)
            points.push_back({static_cast<Eigen::Index>(d),
                              static_cast<Eigen::Index>(std::lround(nod * d)), nod});

    std::vector<double> iters(points.size() * static_cast<std::size_t>(reps), 0.0);
    ctx.n_jobs = static_cast<long>(iters.size());
    ctx.n_failures = run_jobs(iters.size(), [&](std::size_t j) {
        const std::size_t pt = j / static_cast<std::size_t>(reps);
        const auto rep = static_cast<std::uint64_t>(j % static_cast<std::size_t>(reps));
        const Point& P = points[pt];
        ClassInstance ci = make_class_instance(P.n, P.d, theta0_norm, ctx.job_seed(pt, rep));
        OptConfig oc = class_gd_config(cfg);
        oc.radius = ci.spec.radius;
        oc.max_iters = kmax;
        oc.grad_tol = 0.0;
        oc.move_tol = 0.0;
        oc.store_every_after = kmax + 1;
        Rng rng(derive_seed(ctx.job_seed(pt, rep), 0x111du));
        const ParamVec init = draw_init(InitLaw::gaussian(1.0), P.d, P.d, rng);
        const Trajectory t = gd_projected(ci.spec, ci.data, init, oc);
        const auto dist = distance_series(t, t.final, kmax);
        int hit = kmax;
        for (int k = 0; k <= kmax; ++k)
            if (dist[static_cast<std::size_t>(k)] <= target) {
                hit = k;
                break;
            }
        iters[j] = hit;
    });

    CsvFile out(ctx.path("fig4b_iterations.csv"), "d,n_over_d,n,iterations,n_reps");
    for (std::size_t pt = 0; pt < points.size(); ++pt) {
        std::vector<double> vals(iters.begin() + static_cast<long>(pt) * reps,
                                 iters.begin() + static_cast<long>(pt + 1) * reps);
        out.row(points[pt].d, points[pt].nod, points[pt].n, quantile_trimmed_mean(vals), reps);
    }
    ctx.files.push_back(out.path());
}

// ---------- sparse (fig5, fig6) ----------

struct SparseParams {
    Eigen::Index d, n;
    int s0;
    double lambda, r;
};

SparseParams sparse_params(const Json& cfg) {
    SparseParams p;
    p.d = static_cast<Eigen::Index>(jget(cfg, "d"));
    p.s0 = jgeti(cfg, "s0");
    const double logd = std::log(static_cast<double>(p.d));
    const double n_formula = jget(cfg, "n_factor") * p.s0 * logd * logd;
    p.n = static_cast<Eigen::Index>(std::lround(std::min(n_formula, jget(cfg, "n_cap"))));
    p.lambda = jget(cfg, "lambda");
    if (p.lambda <= 0.0) p.lambda = 0.01 * std::sqrt(logd * logd / static_cast<double>(p.n));
    p.r = jget(cfg, "r");
    return p;
}

ClassInstance make_sparse_instance(const SparseParams& p, std::uint64_t seed) {
    GenConfig g;
    g.family = Family::classification;
    g.n = p.n;
    g.d = p.d;
    g.theta0 = Theta0Spec::sparse(p.s0, 1.0);
    g.seed = seed;
    ClassInstance inst;
    auto [data, th0] = gen_classification(g);
    inst.data = std::move(data);
    inst.theta0 = th0;
    inst.spec.family = Family::classification;
    inst.spec.radius = p.r;
    inst.spec.lambda = p.lambda;
    inst.spec.theta0 = th0;
    inst.spec.validate();
    return inst;
}

OptConfig sparse_prox_config(const Json& cfg, const SparseParams& p) {
    OptConfig oc;
    oc.method = Method::proxgd;
    oc.step = jget(cfg, "h");
    oc.max_iters = jgeti(cfg, "kmax");
    oc.grad_tol = jget(cfg, "grad_tol");
    oc.radius = p.r;
    oc.lambda = p.lambda;
    return oc;
}

void run_fig5(Ctx& ctx) {
    const auto& cfg = ctx.cfg;
    const SparseParams p = sparse_params(cfg);
    const int instances = jgeti(cfg, "instances");
    const int inits = jgeti(cfg, "inits");

    std::vector<SpreadCurve> curves(static_cast<std::size_t>(instances));
    ctx.n_jobs = instances;
    ctx.n_failures = run_jobs(curves.size(), [&](std::size_t j) {
        const std::uint64_t seed = ctx.job_seed(0, j);
        ClassInstance ci = make_sparse_instance(p, seed);
        curves[j] = init_spread_curve(ci.spec, ci.data, sparse_prox_config(cfg, p),
                                      InitLaw::gaussian(1.0), inits, derive_seed(seed, 0x5e5eu));
    });

    CsvFile out(ctx.path("fig5_spread.csv"), "k,std_mean,n_instances");
    int kmax = 0;
    for (const auto& c : curves)
        if (!c.ks.empty()) kmax = std::max(kmax, c.ks.back());
    for (int k = 0; k <= kmax; ++k) {
        double acc = 0.0;
        int cnt = 0;
        for (const auto& c : curves) {
            if (c.stds.empty()) continue;
            const auto idx = static_cast<std::size_t>(std::min<long>(k, static_cast<long>(c.stds.size()) - 1));
            acc += c.stds[idx];
            ++cnt;
        }
        if (cnt == 0) break;
        out.row(k, acc / cnt, cnt);
    }
    ctx.files.push_back(out.path());
}

void run_fig6(Ctx& ctx) {
    const auto& cfg = ctx.cfg;
    const SparseParams p = sparse_params(cfg);
    const int reps = jgeti(cfg, "reps");
    const int kmax = jgeti(cfg, "kmax");

    std::vector<CurveJobResult> results(static_cast<std::size_t>(reps));
    ctx.n_jobs = reps;
    ctx.n_failures = run_jobs(results.size(), [&](std::size_t j) {
        const std::uint64_t seed = ctx.job_seed(0, j);
        ClassInstance ci = make_sparse_instance(p, seed);
        OptConfig oc = sparse_prox_config(cfg, p);
        oc.max_iters = kmax;
        oc.grad_tol = 0.0;
        oc.move_tol = 0.0;
        oc.store_every_after = kmax + 1;
        Rng rng(derive_seed(seed, 0x111du));
        const ParamVec init = draw_init(InitLaw::gaussian(1.0), p.d, p.d, rng);
        const Trajectory t = prox_gd(ci.spec, ci.data, init, oc);
        results[j].dist = distance_series(t, t.final, kmax);
    });

    CsvFile out(ctx.path("fig6_convergence.csv"), "k,dist,n_reps");
    for (int k = 0; k <= kmax; ++k) {
        std::vector<double> vals;
        for (const auto& r : results)
            if (!r.dist.empty()) vals.push_back(r.dist[static_cast<std::size_t>(k)]);
        if (vals.empty()) continue;
        out.row(k, quantile_trimmed_mean(vals), static_cast<long>(vals.size()));
    }
    ctx.files.push_back(out.path());
}

// ---------- robust regression (fig7, fig8a, fig8b) ----------

struct RegInstance {
    ModelSpec spec;
    Dataset data;
    ParamVec theta0;
};

RegInstance make_reg_instance(Eigen::Index n, Eigen::Index d, const NoiseSpec& noise, double t0,
                              double r, std::uint64_t seed) {
    GenConfig g;
    g.family = Family::robust_regression;
    g.n = n;
    g.d = d;
    g.theta0 = Theta0Spec::random_norm(1.0);
    g.noise = noise;
    g.seed = seed;
    RegInstance inst;
    auto [data, th0] = gen_regression(g);
    inst.data = std::move(data);
    inst.theta0 = th0;
    inst.spec.family = Family::robust_regression;
    inst.spec.loss = RobustLoss::tukey(t0);
    inst.spec.radius = r;
    inst.spec.theta0 = th0;
    inst.spec.validate();
    return inst;
}

OptConfig reg_gd_config(const Json& cfg) {
    OptConfig oc;
    oc.method = Method::gd;
    oc.step = jget(cfg, "h");
    oc.max_iters = jgeti(cfg, "kmax");
    oc.grad_tol = jget(cfg, "grad_tol");
    oc.radius = jget(cfg, "r");
    oc.allow_halving = true;  // no step-size prescription for this family
    return oc;
}

void run_fig7(Ctx& ctx) {
    const auto& cfg = ctx.cfg;
    const auto d = static_cast<Eigen::Index>(jget(cfg, "d"));
    const auto n = static_cast<Eigen::Index>(jget(cfg, "n"));
    const int instances = jgeti(cfg, "instances");
    const int inits = jgeti(cfg, "inits");

    std::vector<SpreadCurve> curves(static_cast<std::size_t>(instances));
    ctx.n_jobs = instances;
    ctx.n_failures = run_jobs(curves.size(), [&](std::size_t j) {
        const std::uint64_t seed = ctx.job_seed(0, j);
        RegInstance ri = make_reg_instance(n, d, NoiseSpec::gaussian(1.0), jget(cfg, "t0"),
                                           jget(cfg, "r"), seed);
        curves[j] = init_spread_curve(ri.spec, ri.data, reg_gd_config(cfg),
                                      InitLaw::gaussian(jget(cfg, "init_scale")), inits,
                                      derive_seed(seed, 0x5e5eu));
    });

    CsvFile out(ctx.path("fig7_spread.csv"), "k,std_mean,n_instances");
    int kmax = 0;
    for (const auto& c : curves)
        if (!c.ks.empty()) kmax = std::max(kmax, c.ks.back());
    for (int k = 0; k <= kmax; ++k) {
        double acc = 0.0;
        int cnt = 0;
        for (const auto& c : curves) {
            if (c.stds.empty()) continue;
            const auto idx = static_cast<std::size_t>(std::min<long>(k, static_cast<long>(c.stds.size()) - 1));
            acc += c.stds[idx];
            ++cnt;
        }
        if (cnt == 0) break;
        out.row(k, acc / cnt, cnt);
    }
    ctx.files.push_back(out.path());
}

void run_fig8a(Ctx& ctx) {
    const auto& cfg = ctx.cfg;
    const auto d = static_cast<Eigen::Index>(jget(cfg, "d"));
    const auto n = static_cast<Eigen::Index>(jget(cfg, "n"));
    const auto delta_list = jvec(cfg, "delta");
    const int instances = jgeti(cfg, "instances");
    const int inits = jgeti(cfg, "inits");
    const double sigma2_out = jget(cfg, "sigma2_out");

    std::vector<SpreadCurve> curves(delta_list.size() * static_cast<std::size_t>(instances));
    ctx.n_jobs = static_cast<long>(curves.size());
    ctx.n_failures = run_jobs(curves.size(), [&](std::size_t j) {
        const std::size_t pt = j / static_cast<std::size_t>(instances);
        const auto inst = static_cast<std::uint64_t>(j % static_cast<std::size_t>(instances));
        const double delta = delta_list[pt];
        const NoiseSpec noise = delta > 0.0 ? NoiseSpec::contaminated(delta, sigma2_out)
                                            : NoiseSpec::gaussian(1.0);
        const std::uint64_t seed = ctx.job_seed(pt, inst);
        RegInstance ri = make_reg_instance(n, d, noise, jget(cfg, "t0"), jget(cfg, "r"), seed);
        curves[j] = init_spread_curve(ri.spec, ri.data, reg_gd_config(cfg),
                                      InitLaw::gaussian(jget(cfg, "init_scale")), inits,
                                      derive_seed(seed, 0x5e5eu));
    });

    CsvFile out(ctx.path("fig8a_spread.csv"), "delta,k,std_mean,n_instances");
    for (std::size_t pt = 0; pt < delta_list.size(); ++pt) {
        int kmax = 0;
        for (int i = 0; i < instances; ++i) {
            const auto& c = curves[pt * instances + static_cast<std::size_t>(i)];
            if (!c.ks.empty()) kmax = std::max(kmax, c.ks.back());
        }
        for (int k = 0; k <= kmax; ++k) {
            double acc = 0.0;
            int cnt = 0;
            for (int i = 0; i < instances; ++i) {
                const auto& c = curves[pt * instances + static_cast<std::size_t>(i)];
                if (c.stds.empty()) continue;
                const auto idx =
                    static_cast<std::size_t>(std::min<long>(k, static_cast<long>(c.stds.size()) - 1));
                acc += c.stds[idx];
                ++cnt;
            }
            if (cnt == 0) break;
            out.row(delta_list[pt], k, acc / cnt, cnt);
        }
    }
    ctx.files.push_back(out.path());
}

void run_fig8b(Ctx& ctx) {
    const auto& cfg = ctx.cfg;
    const auto d = static_cast<Eigen::Index>(jget(cfg, "d"));
    const auto n = static_cast<Eigen::Index>(jget(cfg, "n"));
    const auto sigma2_list = jvec(cfg, "sigma2_out");
    const double delta = jget(cfg, "delta");
    const int reps = jgeti(cfg, "reps");

    std::vector<double> tukey_err(sigma2_list.size() * static_cast<std::size_t>(reps), 0.0);
    std::vector<double> ols_err(tukey_err.size(), 0.0);
    ctx.n_jobs = static_cast<long>(tukey_err.size());
    ctx.n_failures = run_jobs(tukey_err.size(), [&](std::size_t j) {
        const std::size_t pt = j / static_cast<std::size_t>(reps);
        const auto rep = static_cast<std::uint64_t>(j % static_cast<std::size_t>(reps));
        const std::uint64_t seed = ctx.job_seed(pt, rep);
        const NoiseSpec noise = NoiseSpec::contaminated(delta, sigma2_list[pt]);
        RegInstance ri = make_reg_instance(n, d, noise, jget(cfg, "t0"), jget(cfg, "r"), seed);
        Rng rng(derive_seed(seed, 0x111du));
        ParamVec init = draw_init(InitLaw::gaussian(jget(cfg, "init_scale")), d, d, rng);
        if (init.norm() > jget(cfg, "r")) init = project_ball(init, jget(cfg, "r"));
        const Trajectory t = gd_projected(ri.spec, ri.data, init, reg_gd_config(cfg));
        tukey_err[j] = (t.final - ri.theta0).norm();
        // ordinary least squares baseline, closed form
        const Matrix x = ri.data.features;
        const ParamVec theta_ols =
            (x.transpose() * x).ldlt().solve(x.transpose() * ri.data.responses);
        ols_err[j] = (theta_ols - ri.theta0).norm();
    });

    CsvFile out(ctx.path("fig8b_contamination.csv"), "sigma2_out,estimator,mean_error,std_error,n_reps");
    const auto emit = [&](const std::vector<double>& errs, const char* name) {
        for (std::size_t pt = 0; pt < sigma2_list.size(); ++pt) {
            double mean = 0.0, sq = 0.0;
            for (int r = 0; r < reps; ++r) mean += errs[pt * reps + static_cast<std::size_t>(r)];
            mean /= reps;
            for (int r = 0; r < reps; ++r) {
                const double e = errs[pt * reps + static_cast<std::size_t>(r)] - mean;
                sq += e * e;
            }
            out.row(sigma2_list[pt], name, mean, reps > 1 ? std::sqrt(sq / (reps - 1)) : 0.0, reps);
        }
    };
    emit(tukey_err, "tukey");
    emit(ols_err, "ols");
    ctx.files.push_back(out.path());
}

// ---------- gmm (fig9a, fig9b) ----------

struct GmmRun {
    std::vector<double> err;   // distance to the closer true configuration
    std::vector<double> dist;  // distance to the run's own limit
};

GmmRun run_gmm_instance(const Json& cfg, Eigen::Index d, std::uint64_t seed) {
    GenConfig g;
    g.family = Family::gmm2;
    g.n = static_cast<Eigen::Index>(std::lround(jget(cfg, "n_over_d") * static_cast<double>(d)));
    g.d = d;
    g.separation = 0.5 * jget(cfg, "separation_dist");
    g.seed = seed;
    const Gmm2Data gen = gen_gmm2(g);

    ModelSpec spec;
    spec.family = Family::gmm2;
    const int kmax = jgeti(cfg, "kmax");
    OptConfig oc;
    oc.method = Method::gd;
    oc.step = jget(cfg, "h");
    oc.max_iters = kmax;
    oc.grad_tol = 0.0;
    oc.move_tol = 0.0;
    oc.store_every_after = kmax + 1;
    oc.allow_halving = true;

    // init: both blocks near the sample mean, jittered
    const ParamVec mean = gen.data.features.colwise().mean().transpose();
    Rng rng(derive_seed(seed, 0x111du));
    ParamVec init(2 * d);
    init.head(d) = mean + rng.normal_vector(d) / std::sqrt(static_cast<double>(d));
    init.tail(d) = mean + rng.normal_vector(d) / std::sqrt(static_cast<double>(d));

    const Trajectory t = gd_projected(spec, gen.data, init, oc);
    ParamVec plus(2 * d), minus(2 * d);
    plus.head(d) = gen.center1;
    plus.tail(d) = gen.center2;
    minus.head(d) = gen.center2;
    minus.tail(d) = gen.center1;

    GmmRun run;
    run.dist = distance_series(t, t.final, kmax);
    run.err.resize(static_cast<std::size_t>(kmax) + 1,
                   std::min((t.final - plus).norm(), (t.final - minus).norm()));
    for (std::size_t i = 0; i < t.ks.size(); ++i) {
        const int k = t.ks[i];
        if (k <= kmax)
            run.err[static_cast<std::size_t>(k)] =
                std::min((t.iterates[i] - plus).norm(), (t.iterates[i] - minus).norm());
    }
    return run;
}

void run_fig9(Ctx& ctx, bool statistical_error) {
    const auto& cfg = ctx.cfg;
    const auto d_list = jvec(cfg, "d");
    const int reps = jgeti(cfg, "reps");
    const int kmax = jgeti(cfg, "kmax");

    std::vector<GmmRun> runs(d_list.size() * static_cast<std::size_t>(reps));
    ctx.n_jobs = static_cast<long>(runs.size());
    ctx.n_failures = run_jobs(runs.size(), [&](std::size_t j) {
        const std::size_t pt = j / static_cast<std::size_t>(reps);
        const auto rep = static_cast<std::uint64_t>(j % static_cast<std::size_t>(reps));
        runs[j] = run_gmm_instance(cfg, static_cast<Eigen::Index>(d_list[pt]), ctx.job_seed(pt, rep));
    });

    const std::string name = statistical_error ? "fig9a_error.csv" : "fig9b_convergence.csv";
    CsvFile out(ctx.path(name), statistical_error ? "d,k,err,n_reps" : "d,k,dist,n_reps");
    for (std::size_t pt = 0; pt < d_list.size(); ++pt) {
        for (int k = 0; k <= kmax; ++k) {
            std::vector<double> vals;
            for (int r = 0; r < reps; ++r) {
                const auto& run = runs[pt * reps + static_cast<std::size_t>(r)];
                const auto& series = statistical_error ? run.err : run.dist;
                if (!series.empty()) vals.push_back(series[static_cast<std::size_t>(k)]);
            }
            if (vals.empty()) continue;
            out.row(static_cast<Eigen::Index>(d_list[pt]), k, quantile_trimmed_mean(vals),
                    static_cast<long>(vals.size()));
        }
    }
    ctx.files.push_back(out.path());
}

// ---------- morse-cert ----------

void run_morse_cert(Ctx& ctx) {
    const auto& cfg = ctx.cfg;
    const double eps = jget(cfg, "epsilon");
    const double eta = jget(cfg, "eta");
    GridSpec grid;
    grid.budget = static_cast<long>(jget(cfg, "budget"));
    grid.seed = ctx.job_seed(0, 0);

    Objective quadratic;
    quadratic.value = [](const ParamVec& x) { return 0.5 * x.squaredNorm(); };
    quadratic.grad = [](const ParamVec& x) { return x; };
    quadratic.hess = [](const ParamVec& x) { return Matrix(Matrix::Identity(x.size(), x.size())); };
    Objective constant;
    constant.value = [](const ParamVec&) { return 1.0; };
    constant.grad = [](const ParamVec& x) { return ParamVec(ParamVec::Zero(x.size())); };
    constant.hess = [](const ParamVec& x) { return Matrix(Matrix::Zero(x.size(), x.size())); };
    Objective saddle;
    saddle.value = [](const ParamVec& x) { return x[0] * x[0] - x[1] * x[1]; };
    saddle.grad = [](const ParamVec& x) {
        ParamVec g(2);
        g << 2.0 * x[0], -2.0 * x[1];
        return g;
    };
    saddle.hess = [](const ParamVec&) {
        Matrix h(2, 2);
        h << 2.0, 0.0, 0.0, -2.0;
        return h;
    };

    CsvFile out(ctx.path("morse_cert.csv"),
                "function,epsilon,eta,holds,n_witnesses,points_checked,n_critical,first_index");
    const BallRegion region{ParamVec::Zero(2), 1.0};
    struct Case {
        const char* name;
        const Objective* obj;
    } cases[] = {{"quadratic", &quadratic}, {"constant", &constant}, {"saddle", &saddle}};
    ctx.n_jobs = 3;
    for (const auto& c : cases) {
        const MorseCertificate cert = certify_strong_morse(*c.obj, region, grid, eps, eta);
        std::vector<CriticalPoint> pts;
        if (std::string(c.name) != "constant")
            pts = find_critical_points(*c.obj, region, 16, ctx.job_seed(1, fnv1a(c.name)));
        out.row(c.name, eps, eta, cert.holds ? 1 : 0, static_cast<long>(cert.witnesses.size()),
                cert.points_checked, static_cast<long>(pts.size()),
                pts.empty() ? -1 : pts.front().index);
        LandscapeReport report;
        report.critical_points = pts;
        report.certificate = cert;
        report.has_certificate = true;
        const std::string rpath = ctx.path(std::string("morse_cert_") + c.name + ".json");
        write_landscape_report(rpath, report);
        ctx.files.push_back(rpath);
    }
    ctx.files.insert(ctx.files.begin(), out.path());
}

// ---------- unif-conv ----------

void run_unif_conv(Ctx& ctx) {
    const auto& cfg = ctx.cfg;
    const auto d = static_cast<Eigen::Index>(jget(cfg, "d"));
    const double r = jget(cfg, "r");
    const int grid_points = jgeti(cfg, "grid_points");
    const auto n_base = static_cast<Eigen::Index>(jget(cfg, "n"));
    const int factor = jgeti(cfg, "factor");
    const int seeds = jgeti(cfg, "seeds");

    // fixed theta grid and true parameter, shared across seeds
    Rng grid_rng(ctx.job_seed(0, 0xf00du));
    const ParamVec theta0 = jget(cfg, "theta0_norm") * grid_rng.unit_vector(d);
    std::vector<ParamVec> grid;
    for (int i = 0; i < grid_points; ++i) {
        const ParamVec dir = grid_rng.unit_vector(d);
        const double rad = r * std::pow(grid_rng.uniform01(), 1.0 / static_cast<double>(d));
        grid.push_back(rad * dir);
    }

    ModelSpec spec;
    spec.family = Family::classification;
    spec.radius = r;
    spec.theta0 = theta0;
    const PopulationOracle oracle =
        make_classification_oracle(theta0, Activation::logistic(), jgeti(cfg, "nodes"));

    struct Row {
        double grad_gap_base = 0.0, hess_gap_base = 0.0;
        double grad_gap_big = 0.0, hess_gap_big = 0.0;
    };
    std::vector<Row> rows(static_cast<std::size_t>(seeds));
    ctx.n_jobs = seeds;
    ctx.n_failures = run_jobs(rows.size(), [&](std::size_t s) {
        GenConfig g;
        g.family = Family::classification;
        g.d = d;
        g.theta0 = Theta0Spec::explicit_vec(theta0);
        for (int which = 0; which < 2; ++which) {
            g.n = which == 0 ? n_base : n_base * factor;
            g.seed = derive_seed(ctx.job_seed(1, s), static_cast<std::uint64_t>(which));
            auto [data, th0] = gen_classification(g);
            (void)th0;
            const GapResult gap = mc_pop_gap(spec, data, oracle, grid);
            if (which == 0) {
                rows[s].grad_gap_base = gap.sup_grad_gap;
                rows[s].hess_gap_base = gap.sup_hess_gap;
            } else {
                rows[s].grad_gap_big = gap.sup_grad_gap;
                rows[s].hess_gap_big = gap.sup_hess_gap;
            }
        }
    });

    CsvFile out(ctx.path("unif_conv.csv"), "seed,n,sup_grad_gap,sup_hess_gap");
    for (int s = 0; s < seeds; ++s) {
        out.row(s, n_base, rows[static_cast<std::size_t>(s)].grad_gap_base,
                rows[static_cast<std::size_t>(s)].hess_gap_base);
        out.row(s, static_cast<Eigen::Index>(n_base) * factor, rows[static_cast<std::size_t>(s)].grad_gap_big,
                rows[static_cast<std::size_t>(s)].hess_gap_big);
    }
    ctx.files.push_back(out.path());

    std::vector<double> gratio, hratio;
    for (const auto& row : rows) {
        if (row.grad_gap_base > 0.0) gratio.push_back(row.grad_gap_big / row.grad_gap_base);
        if (row.hess_gap_base > 0.0) hratio.push_back(row.hess_gap_big / row.hess_gap_base);
    }
    const auto median = [](std::vector<double> v) {
        if (v.empty()) return 0.0;
        std::sort(v.begin(), v.end());
        const std::size_t m = v.size() / 2;
        return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    };
    ctx.manifest_extra["median_grad_gap_ratio"] = median(gratio);
    ctx.manifest_extra["median_hess_gap_ratio"] = median(hratio);
    ctx.manifest_extra["grid_supremum_note"] =
        "gaps are suprema over the finite theta grid recorded in this manifest";
    ctx.manifest_extra["grid_points"] = grid_points;
}

}  // namespace

std::vector<std::string> experiment_ids() {
    return {"fig3a", "fig3b", "fig4a", "fig4b",  "fig5",       "fig6",     "fig7",
            "fig8a", "fig8b", "fig9a", "fig9b",  "morse-cert", "unif-conv"};
}

Json experiment_defaults(const std::string& id) {
    // desk-scale defaults; full-scale values stay reachable through config
    if (id == "fig3a")
        return Json{{"d", {10, 20, 40}}, {"ratio", {0.5, 1.0, 2.0, 4.0, 8.0}}, {"instances", 30},
                    {"inits", 5},        {"theta0_norm", 3.0},                 {"kmax", 2000},
                    {"h", 1.0},          {"grad_tol", 1e-9},                   {"success_eps", 1e-2}};
    if (id == "fig3b")
        return Json{{"d", {20, 40}}, {"n_over_d", {10, 20, 40, 80}}, {"reps", 30},
                    {"theta0_norm", 1.0}, {"kmax", 2000}, {"h", 1.0}, {"grad_tol", 1e-10}};
    if (id == "fig4a")
        return Json{{"d", {20, 40}}, {"n_over_d", 20.0}, {"reps", 30}, {"theta0_norm", 1.0},
                    {"kmax", 250},  {"h", 1.0},          {"grad_tol", 0.0}};
    if (id == "fig4b")
        return Json{{"d", {20, 40}}, {"n_over_d", {5, 10, 20, 40}}, {"reps", 30},
                    {"theta0_norm", 1.0}, {"kmax", 2000}, {"h", 1.0}, {"grad_tol", 0.0},
                    {"target", 1e-4}};
    if (id == "fig5")
        return Json{{"d", 200.0}, {"s0", 5}, {"n_factor", 20.0}, {"n_cap", 4000.0}, {"lambda", 0.0},
                    {"r", 10.0},  {"instances", 3}, {"inits", 5}, {"kmax", 400}, {"h", 1.0},
                    {"grad_tol", 1e-9}};
    if (id == "fig6")
        return Json{{"d", 200.0}, {"s0", 5}, {"n_factor", 20.0}, {"n_cap", 4000.0}, {"lambda", 0.0},
                    {"r", 10.0},  {"reps", 10}, {"kmax", 400}, {"h", 1.0}, {"grad_tol", 0.0}};
    if (id == "fig7")
        return Json{{"d", 40.0}, {"n", 240.0}, {"t0", 4.685}, {"r", 10.0}, {"instances", 3},
                    {"inits", 5}, {"init_scale", 25.0}, {"kmax", 400}, {"h", 1.0}, {"grad_tol", 1e-9}};
    if (id == "fig8a")
        return Json{{"d", 40.0}, {"n", 240.0}, {"delta", {0.0, 0.1, 0.2, 0.4}}, {"sigma2_out", 100.0},
                    {"t0", 4.685}, {"r", 10.0}, {"instances", 3}, {"inits", 5}, {"init_scale", 25.0},
                    {"kmax", 400}, {"h", 1.0}, {"grad_tol", 1e-9}};
    if (id == "fig8b")
        return Json{{"d", 40.0}, {"n", 240.0}, {"delta", 0.1}, {"sigma2_out", {1.0, 4.0, 25.0, 100.0}},
                    {"t0", 4.685}, {"r", 10.0}, {"reps", 20}, {"init_scale", 25.0}, {"kmax", 2000},
                    {"h", 1.0}, {"grad_tol", 1e-10}};
    if (id == "fig9a" || id == "fig9b")
        return Json{{"d", {4, 8, 16}}, {"n_over_d", 6.0}, {"reps", 30}, {"separation_dist", 3.0},
                    {"kmax", 400}, {"h", 1.0}};
    if (id == "morse-cert")
        return Json{{"budget", 20000.0}, {"epsilon", 0.1}, {"eta", 0.5}};
    if (id == "unif-conv")
        return Json{{"d", 10.0}, {"r", 3.0}, {"theta0_norm", 1.0}, {"grid_points", 200},
                    {"n", 2000.0}, {"factor", 4}, {"seeds", 20}, {"nodes", 60}};
    throw InvalidInput("unknown experiment id: " + id);
}

ExperimentResult run_experiment(Json cfg, const std::string& out_dir, std::uint64_t master_seed) {
    if (!cfg.contains("experiment")) throw InvalidInput("experiment config: missing 'experiment'");
    const std::string id = cfg.at("experiment").get<std::string>();
    Json resolved = merge_config(experiment_defaults(id), cfg);
    resolved["experiment"] = id;

    // validate replication-style counts up front
    for (const char* key : {"instances", "inits", "reps", "seeds", "grid_points"})
        if (resolved.contains(key) && resolved[key].get<double>() < 1)
            throw InvalidInput(std::string("experiment config: ") + key + " must be >= 1");

    fs::create_directories(out_dir);
    Ctx ctx;
    ctx.out_dir = out_dir;
    ctx.id = id;
    ctx.master_seed = master_seed;
    ctx.tag = fnv1a(id);
    ctx.cfg = resolved;

    const auto t0 = std::chrono::steady_clock::now();
    if (id == "fig3a") run_fig3a(ctx);
    else if (id == "fig3b") run_fig3b(ctx);
    else if (id == "fig4a") run_fig4a(ctx);
    else if (id == "fig4b") run_fig4b(ctx);
    else if (id == "fig5") run_fig5(ctx);
    else if (id == "fig6") run_fig6(ctx);
    else if (id == "fig7") run_fig7(ctx);
    else if (id == "fig8a") run_fig8a(ctx);
    else if (id == "fig8b") run_fig8b(ctx);
    else if (id == "fig9a") run_fig9(ctx, true);
    else if (id == "fig9b") run_fig9(ctx, false);
    else if (id == "morse-cert") run_morse_cert(ctx);
    else if (id == "unif-conv") run_unif_conv(ctx);
    else throw InvalidInput("unknown experiment id: " + id);
    const auto t1 = std::chrono::steady_clock::now();

    ExperimentResult result;
    result.curve_files = ctx.files;
    result.n_jobs = ctx.n_jobs;
    result.n_failures = ctx.n_failures;

    std::vector<std::string> csvs;
    for (const auto& f : ctx.files)
        if (f.size() > 4 && f.substr(f.size() - 4) == ".csv") csvs.push_back(f);
    if (!csvs.empty()) {
        result.plotdata_file = ctx.path(id + "_plotdata.csv");
        emit_plotdata(csvs, result.plotdata_file);
    }

    Json manifest;
    manifest["experiment"] = id;
    manifest["config"] = resolved;
    manifest["master_seed"] = master_seed;
    manifest["seed_scheme"] = "derive_seed(master_seed, fnv1a(experiment), point_index, instance_index)";
    manifest["code_version"] = kVersion;
    manifest["n_jobs"] = ctx.n_jobs;
    manifest["n_failures"] = ctx.n_failures;
    manifest["files"] = ctx.files;
    manifest["wall_time_s"] = std::chrono::duration<double>(t1 - t0).count();
    for (auto it = ctx.manifest_extra.begin(); it != ctx.manifest_extra.end(); ++it)
        manifest[it.key()] = it.value();
    result.manifest_file = ctx.path(id + "_manifest.json");
    std::ofstream ms(result.manifest_file);
    if (!ms) throw InvalidInput("cannot open for writing: " + result.manifest_file);
    ms << manifest.dump(2) << '\n';
    return result;
}

void emit_plotdata(const std::vector<std::string>& curve_files, const std::string& out_path) {
    if (curve_files.empty()) throw InvalidInput("emit_plotdata: no curve files");
    std::ofstream os(out_path);
    if (!os) throw InvalidInput("cannot open for writing: " + out_path);
    os << "curve,row\n";
    for (const auto& f : curve_files) {
        std::ifstream is(f);
        if (!is) throw InvalidInput("emit_plotdata: missing input " + f);
        const std::string name = fs::path(f).stem().string();
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            os << name << ',' << line << '\n';
        }
    }
}

double quantile_trimmed_mean(std::vector<double> values, double lo, double hi) {
    if (values.empty()) throw InvalidInput("quantile_trimmed_mean: empty input");
    std::sort(values.begin(), values.end());
    const auto quantile = [&](double q) {
        const double pos = q * (static_cast<double>(values.size()) - 1.0);
        const auto i = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - std::floor(pos);
        if (i + 1 >= values.size()) return values.back();
        return values[i] * (1.0 - frac) + values[i + 1] * frac;
    };
    const double qlo = quantile(lo), qhi = quantile(hi);
    double acc = 0.0;
    long cnt = 0;
    for (double v : values)
        if (v >= qlo && v <= qhi) {
            acc += v;
            ++cnt;
        }
    return cnt > 0 ? acc / static_cast<double>(cnt) : quantile(0.5);
}

std::vector<double> moving_average3(const std::vector<double>& xs) {
    std::vector<double> out(xs.size(), 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double acc = xs[i];
        int cnt = 1;
        if (i > 0) { acc += xs[i - 1]; ++cnt; }
        if (i + 1 < xs.size()) { acc += xs[i + 1]; ++cnt; }
        out[i] = acc / cnt;
    }
    return out;
}

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw InvalidInput("fit_line: need >= 2 points");
    const auto n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

}  // namespace riskscape
