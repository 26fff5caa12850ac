#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "riskscape/config.hpp"
#include "riskscape/datagen.hpp"
#include "riskscape/dataset_io.hpp"
#include "riskscape/experiments.hpp"
#include "riskscape/landscape.hpp"
#include "riskscape/linalg.hpp"
#include "riskscape/optim.hpp"
#include "riskscape/parallel.hpp"
#include "riskscape/population.hpp"

namespace rs = riskscape;
using rs::Json;

namespace {

rs::ParamVec json_to_vec(const Json& j) {
    rs::ParamVec v(static_cast<Eigen::Index>(j.size()));
    Eigen::Index i = 0;
    for (const auto& x : j) v[i++] = x.get<double>();
    return v;
}

Json vec_to_json(const rs::ParamVec& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

rs::NoiseSpec parse_noise(const Json& j) {
    const std::string kind = j.value("kind", "gaussian");
    if (kind == "none") return rs::NoiseSpec::none();
    if (kind == "gaussian") return rs::NoiseSpec::gaussian(j.value("sigma2", 1.0));
    if (kind == "contaminated")
        return rs::NoiseSpec::contaminated(j.value("delta", 0.1), j.value("sigma2_out", 100.0));
    throw rs::InvalidInput("unknown noise kind: " + kind);
}

rs::GenConfig parse_gen_config(const Json& j) {
    rs::GenConfig cfg;
    cfg.family = rs::family_from_name(j.at("family").get<std::string>());
    cfg.n = j.at("n").get<Eigen::Index>();
    cfg.d = j.at("d").get<Eigen::Index>();
    if (j.contains("theta0")) {
        cfg.theta0 = rs::Theta0Spec::explicit_vec(json_to_vec(j["theta0"]));
    } else if (j.contains("s0")) {
        cfg.theta0 = rs::Theta0Spec::sparse(j["s0"].get<int>(), j.value("theta0_norm", 1.0));
    } else {
        cfg.theta0 = rs::Theta0Spec::random_norm(j.value("theta0_norm", 1.0));
    }
    if (j.contains("noise")) cfg.noise = parse_noise(j["noise"]);
    if (j.contains("activation") && j["activation"].get<std::string>() == "probit")
        cfg.activation = rs::Activation::probit();
    if (j.contains("separation_dist")) cfg.separation = 0.5 * j["separation_dist"].get<double>();
    if (j.contains("separation")) cfg.separation = j["separation"].get<double>();
    if (j.contains("center1")) {
        cfg.center1 = json_to_vec(j["center1"]);
        cfg.center2 = json_to_vec(j["center2"]);
    }
    cfg.seed = j.value("seed", 0ull);
    return cfg;
}

rs::ModelSpec parse_model_spec(const Json& j) {
    rs::ModelSpec spec;
    spec.family = rs::family_from_name(j.at("family").get<std::string>());
    spec.radius = j.value("radius", 10.0);
    spec.lambda = j.value("lambda", 0.0);
    if (j.contains("activation") && j["activation"].get<std::string>() == "probit")
        spec.activation = rs::Activation::probit();
    const std::string loss = j.value("loss", "tukey");
    if (loss == "tukey")
        spec.loss = rs::RobustLoss::tukey(j.value("t0", 4.685));
    else if (loss == "huber")
        spec.loss = rs::RobustLoss::huber(j.value("huber_c", 1.345));
    else
        throw rs::InvalidInput("unknown loss: " + loss);
    if (j.contains("theta0")) spec.theta0 = json_to_vec(j["theta0"]);
    return spec;
}

rs::OptConfig parse_opt_config(const Json& j, const rs::ModelSpec& spec) {
    rs::OptConfig cfg;
    const std::string method = j.value("method", "gd");
    if (method == "gd") cfg.method = rs::Method::gd;
    else if (method == "proxgd") cfg.method = rs::Method::proxgd;
    else if (method == "trust-region") cfg.method = rs::Method::trust_region;
    else throw rs::InvalidInput("unknown optimizer method: " + method);
    cfg.step = j.value("h", 1.0);
    cfg.max_iters = j.value("kmax", 10000);
    cfg.grad_tol = j.value("grad_tol", 1e-8);
    cfg.move_tol = j.value("move_tol", 1e-12);
    cfg.radius = j.value("radius", spec.radius);
    cfg.lambda = j.value("lambda", spec.lambda);
    cfg.allow_halving = j.value("halving", true);
    if (j.contains("tr_initial_radius")) cfg.tr.initial_radius = j["tr_initial_radius"].get<double>();
    if (j.contains("tr_eta_accept")) cfg.tr.eta_accept = j["tr_eta_accept"].get<double>();
    return cfg;
}

rs::PopulationOracle parse_oracle(const Json& j) {
    const std::string family = j.at("family").get<std::string>();
    const int nodes = j.value("nodes", 60);
    if (family == "classification") {
        auto act = j.value("activation", "logistic") == "probit" ? rs::Activation::probit()
                                                                 : rs::Activation::logistic();
        return rs::make_classification_oracle(json_to_vec(j.at("theta0")), act, nodes);
    }
    if (family == "robust-regression") {
        rs::RobustLoss loss = j.value("loss", "tukey") == "huber"
                                  ? rs::RobustLoss::huber(j.value("huber_c", 1.345))
                                  : rs::RobustLoss::tukey(j.value("t0", 4.685));
        rs::NoiseSpec noise = j.contains("noise") ? parse_noise(j["noise"]) : rs::NoiseSpec::gaussian();
        return rs::make_regression_oracle(json_to_vec(j.at("theta0")), loss, noise, nodes);
    }
    if (family == "gmm2")
        return rs::make_gmm2_oracle(json_to_vec(j.at("center1")), json_to_vec(j.at("center2")), nodes);
    throw rs::InvalidInput("unknown oracle family: " + family);
}

int cmd_gen(const Json& cfg, const std::string& out, bool csv) {
    const rs::GenConfig g = parse_gen_config(cfg);
    Json meta;
    rs::Dataset data;
    switch (g.family) {
        case rs::Family::classification: {
            auto [ds, th0] = rs::gen_classification(g);
            data = std::move(ds);
            meta["theta0"] = vec_to_json(th0);
            break;
        }
        case rs::Family::robust_regression: {
            auto [ds, th0] = rs::gen_regression(g);
            data = std::move(ds);
            meta["theta0"] = vec_to_json(th0);
            break;
        }
        case rs::Family::gmm2: {
            auto gd = rs::gen_gmm2(g);
            data = std::move(gd.data);
            meta["center1"] = vec_to_json(gd.center1);
            meta["center2"] = vec_to_json(gd.center2);
            break;
        }
    }
    if (csv)
        rs::write_dataset_csv(out, data);
    else
        rs::write_dataset(out, data);
    meta["n"] = data.n();
    meta["d"] = data.dim();
    meta["seed"] = g.seed;
    std::ofstream ms(out + ".meta.json");
    ms << meta.dump(2) << '\n';
    std::cout << "wrote " << out << " (" << data.n() << " x " << data.dim() << ")\n";
    return 0;
}

int cmd_fit(const Json& cfg, const std::string& data_path, const std::string& out) {
    const rs::Dataset data = rs::read_dataset(data_path);
    rs::ModelSpec spec = parse_model_spec(cfg.at("model"));
    const rs::OptConfig opt = parse_opt_config(cfg.value("optimizer", Json::object()), spec);
    const Eigen::Index p = spec.param_dim(data.dim());

    rs::ParamVec init;
    const Json init_cfg = cfg.value("init", Json::object());
    const std::string kind = init_cfg.value("kind", "gaussian");
    if (kind == "zero") {
        init = rs::ParamVec::Zero(p);
    } else if (kind == "explicit") {
        init = json_to_vec(init_cfg.at("values"));
    } else {
        rs::Rng rng(init_cfg.value("seed", 1ull));
        init = rs::draw_init(rs::InitLaw::gaussian(init_cfg.value("scale", 1.0)), p, data.dim(), rng);
        if (std::isfinite(opt.radius) && init.norm() > opt.radius) init = rs::project_ball(init, opt.radius);
    }

    const rs::Trajectory traj = rs::run_optimizer(spec, data, init, opt);
    std::optional<rs::ParamVec> reference;
    if (cfg.contains("reference")) reference = json_to_vec(cfg["reference"]);
    rs::write_trajectory_csv(out, traj, reference);

    Json summary;
    summary["converged"] = traj.converged;
    summary["reason"] = rs::stop_reason_name(traj.reason);
    summary["iters"] = traj.iters;
    summary["final_risk"] = traj.risks.empty() ? 0.0 : traj.risks.back();
    summary["final_grad_norm"] = traj.grad_norms.empty() ? 0.0 : traj.grad_norms.back();
    summary["final"] = vec_to_json(traj.final);
    summary["at_boundary"] = traj.at_boundary;
    summary["halvings"] = traj.halvings;
    std::ofstream ss(out + ".summary.json");
    ss << summary.dump(2) << '\n';
    std::cout << "fit: " << (traj.converged ? "converged" : "not converged") << " ("
              << rs::stop_reason_name(traj.reason) << ") after " << traj.iters << " iterations\n";
    return 0;
}

int cmd_landscape(const Json& cfg, std::uint64_t seed, const std::string& out) {
    rs::LandscapeReport report;
    rs::BallRegion region;
    const Json rj = cfg.value("region", Json::object());
    region.radius = rj.value("radius", 3.0);

    const int n_starts = cfg.value("n_starts", 40);
    std::optional<rs::Objective> empirical;
    std::optional<rs::Objective> population;
    rs::ModelSpec spec;
    rs::Dataset data;  // outlives the objectives below

    if (cfg.contains("data")) {
        data = rs::read_dataset(cfg["data"].get<std::string>());
        spec = parse_model_spec(cfg.at("model"));
        empirical = rs::make_objective(spec, data);
        region.center = rs::ParamVec::Zero(spec.param_dim(data.dim()));
    }
    if (cfg.contains("population")) {
        const rs::PopulationOracle oracle = parse_oracle(cfg["population"]);
        population = rs::make_pop_objective(oracle);
        const Eigen::Index p = oracle.family == rs::Family::gmm2
                                   ? 2 * oracle.center1.size()
                                   : oracle.theta0.size();
        region.center = rs::ParamVec::Zero(p);
    }
    if (rj.contains("center")) region.center = json_to_vec(rj["center"]);
    if (!empirical && !population)
        throw rs::InvalidInput("landscape: need 'data' + 'model' and/or 'population'");

    const rs::Objective& primary = empirical ? *empirical : *population;
    report.critical_points = rs::find_critical_points(primary, region, n_starts, seed);

    if (empirical && population) {
        const auto pop_points = rs::find_critical_points(*population, region, n_starts,
                                                         rs::derive_seed(seed, 1));
        report.pairing = rs::match_critical_points(report.critical_points, pop_points);
        report.has_pairing = true;
    }
    if (cfg.contains("certify")) {
        const Json cj = cfg["certify"];
        rs::GridSpec grid;
        grid.budget = cj.value("budget", 100000L);
        grid.seed = rs::derive_seed(seed, 2);
        report.certificate = rs::certify_strong_morse(primary, region, grid, cj.value("epsilon", 1e-2),
                                                      cj.value("eta", 1e-2));
        report.has_certificate = true;
    }
    if (cfg.contains("constants") && population) {
        const Json cj = cfg["constants"];
        const rs::PopulationOracle oracle = parse_oracle(cfg["population"]);
        report.constants = rs::measure_landscape_constants(
            *population, oracle.theta0, region.radius, cj.value("eps0", 0.5),
            cj.value("grid_points", 200), rs::derive_seed(seed, 3));
        report.has_constants = true;
    }
    rs::write_landscape_report(out, report);
    std::cout << "landscape: " << report.critical_points.size() << " critical points -> " << out << '\n';
    return 0;
}

int cmd_oracle(const Json& cfg, const std::string& out) {
    rs::PopulationOracle oracle;
    if (cfg.value("method", "quadrature") == "monte-carlo") {
        Json law = cfg.at("law");
        if (!law.contains("n")) law["n"] = 1;  // superseded by mc_samples
        const rs::GenConfig g = parse_gen_config(law);
        rs::ModelSpec spec = parse_model_spec(cfg.at("model"));
        oracle = rs::make_monte_carlo_oracle(spec, g, cfg.value("mc_samples", 1000000L),
                                             cfg.value("mc_seed", 0ull));
    } else {
        oracle = parse_oracle(cfg.at("oracle"));
    }
    Json result;
    if (cfg.value("mode", "eval") == "gap") {
        const rs::Dataset data = rs::read_dataset(cfg.at("data").get<std::string>());
        rs::ModelSpec spec = parse_model_spec(cfg.at("model"));
        rs::Rng rng(cfg.value("grid_seed", 7ull));
        const double r = cfg.value("grid_radius", spec.radius);
        std::vector<rs::ParamVec> grid;
        const Eigen::Index p = spec.param_dim(data.dim());
        for (int i = 0; i < cfg.value("grid_points", 200); ++i) {
            const rs::ParamVec dir = rng.unit_vector(p);
            grid.push_back(r * std::pow(rng.uniform01(), 1.0 / static_cast<double>(p)) * dir);
        }
        const rs::GapResult gap = rs::mc_pop_gap(spec, data, oracle, grid);
        result["sup_grad_gap"] = gap.sup_grad_gap;
        result["sup_hess_gap"] = gap.sup_hess_gap;
        result["grid_points"] = grid.size();
    } else {
        Json rows = Json::array();
        for (const auto& tj : cfg.at("thetas")) {
            const rs::ParamVec th = json_to_vec(tj);
            Json row;
            row["theta"] = vec_to_json(th);
            row["risk"] = rs::pop_risk(oracle, th);
            row["grad_norm"] = rs::pop_grad(oracle, th).norm();
            rows.push_back(row);
        }
        result["evaluations"] = rows;
    }
    std::ofstream os(out);
    if (!os) throw rs::InvalidInput("cannot open for writing: " + out);
    os << result.dump(2) << '\n';
    std::cout << "oracle -> " << out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"riskscape: non-convex M-estimation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_path;
    std::uint64_t seed = 0;
    int threads = 0;
    bool csv = false;

    auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* opt = sub->add_option("--config", config_path, "TOML or JSON config file");
        if (need_config) opt->required();
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--threads", threads, "worker threads (overrides RISKSCAPE_THREADS)");
        sub->add_option("--out", out_path, "output path");
    };

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    add_common(gen, true);
    gen->add_flag("--csv", csv, "write CSV instead of the binary format");

    auto* fit = app.add_subcommand("fit", "run an optimizer on a dataset");
    add_common(fit, true);
    fit->add_option("--data", data_path, "dataset file")->required();

    auto* landscape = app.add_subcommand("landscape", "critical points / certification");
    add_common(landscape, true);

    auto* experiment = app.add_subcommand("experiment", "run a configured experiment sweep");
    add_common(experiment, false);
    std::string exp_id;
    experiment->add_option("--id", exp_id, "experiment id (defaults config)");

    auto* oracle = app.add_subcommand("oracle", "population-oracle evaluations");
    add_common(oracle, true);

    CLI11_PARSE(app, argc, argv);

    try {
        Json cfg = Json::object();
        if (!config_path.empty()) cfg = rs::load_config_file(config_path);
        CLI::App* active = app.get_subcommands().front();
        // precedence: flag > config > default
        if (active->count("--seed") == 0 && cfg.contains("seed"))
            seed = cfg["seed"].get<std::uint64_t>();
        if (threads > 0)
            rs::set_max_threads(threads);
        else if (cfg.contains("threads"))
            rs::set_max_threads(cfg["threads"].get<int>());

        if (gen->parsed()) {
            cfg["seed"] = seed;
            return cmd_gen(cfg, out_path.empty() ? "dataset.bin" : out_path, csv);
        }
        if (fit->parsed()) return cmd_fit(cfg, data_path, out_path.empty() ? "trajectory.csv" : out_path);
        if (landscape->parsed())
            return cmd_landscape(cfg, seed, out_path.empty() ? "landscape.json" : out_path);
        if (oracle->parsed()) return cmd_oracle(cfg, out_path.empty() ? "oracle.json" : out_path);
        if (experiment->parsed()) {
            if (!exp_id.empty()) cfg["experiment"] = exp_id;
            const auto result =
                rs::run_experiment(cfg, out_path.empty() ? "out" : out_path, seed);
            const double max_rate = cfg.value("max_failure_rate", 0.1);
            std::cout << "experiment " << cfg["experiment"].get<std::string>() << ": " << result.n_jobs
                      << " jobs, " << result.n_failures << " failures, manifest "
                      << result.manifest_file << '\n';
            if (result.n_jobs > 0 &&
                static_cast<double>(result.n_failures) > max_rate * static_cast<double>(result.n_jobs))
                return 3;
            return 0;
        }
    } catch (const rs::InvalidInput& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const rs::Unsupported& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
