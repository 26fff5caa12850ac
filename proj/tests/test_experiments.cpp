#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "riskscape/config.hpp"
#include "riskscape/experiments.hpp"
#include "riskscape/parallel.hpp"

using namespace riskscape;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    REQUIRE(is.good());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("toml parsing covers the config subset") {
    const std::string text = R"(
# comment
experiment = "fig3a"
seed = 42
ratio = [0.5, 1, 2]   # inline comment
name = "desk run"
flag = true
[grid]
d = [10, 20]
[params.inner]
h = 1.0
)";
    const Json j = parse_toml(text);
    CHECK(j["experiment"] == "fig3a");
    CHECK(j["seed"] == 42);
    CHECK(j["ratio"].size() == 3);
    CHECK(j["ratio"][1] == 1);
    CHECK(j["name"] == "desk run");
    CHECK(j["flag"] == true);
    CHECK(j["grid"]["d"][1] == 20);
    CHECK(j["params"]["inner"]["h"] == 1.0);

    CHECK_THROWS_AS(parse_toml("key value_without_equals"), InvalidInput);
    CHECK_THROWS_AS(parse_toml("x = [1, 2"), InvalidInput);
}

TEST_CASE("config file loading dispatches on extension and sniffs content") {
    TempDir dir("riskscape_cfg_test");
    const auto toml_path = (dir.path / "a.toml").string();
    std::ofstream(toml_path) << "x = 1\n";
    CHECK(load_config_file(toml_path)["x"] == 1);

    const auto json_path = (dir.path / "b.json").string();
    std::ofstream(json_path) << "{\"x\": 2}";
    CHECK(load_config_file(json_path)["x"] == 2);

    const auto unk_path = (dir.path / "c.cfg").string();
    std::ofstream(unk_path) << "{\"x\": 3}";
    CHECK(load_config_file(unk_path)["x"] == 3);
}

TEST_CASE("merge_config overlays user values over defaults") {
    const Json defaults = {{"a", 1}, {"nested", {{"x", 1}, {"y", 2}}}};
    const Json user = {{"nested", {{"y", 5}}}, {"b", 7}};
    const Json merged = merge_config(defaults, user);
    CHECK(merged["a"] == 1);
    CHECK(merged["b"] == 7);
    CHECK(merged["nested"]["x"] == 1);
    CHECK(merged["nested"]["y"] == 5);
}

TEST_CASE("quantile trimmed mean drops the tails") {
    std::vector<double> vals;
    for (int i = 1; i <= 100; ++i) vals.push_back(i);
    const double m = quantile_trimmed_mean(vals);
    // between the 5th and 95th percentile: mean of 5..95-ish, near 50
    CHECK(m == doctest::Approx(50.5).epsilon(0.01));
    // an extreme outlier is ignored
    vals.back() = 1e9;
    CHECK(quantile_trimmed_mean(vals) <= 60.0);
    CHECK_THROWS_AS(quantile_trimmed_mean({}), InvalidInput);
}

TEST_CASE("moving average smooths with 2-point endpoints") {
    const std::vector<double> xs{0.0, 1.0, 0.0, 1.0};
    const auto sm = moving_average3(xs);
    CHECK(sm[0] == doctest::Approx(0.5));
    CHECK(sm[1] == doctest::Approx(1.0 / 3.0));
    CHECK(sm[3] == doctest::Approx(0.5));
}

TEST_CASE("fit_line recovers an exact affine relation") {
    std::vector<double> xs, ys;
    for (int i = 0; i < 10; ++i) {
        xs.push_back(i);
        ys.push_back(3.0 - 0.5 * i);
    }
    const LineFit fit = fit_line(xs, ys);
    CHECK(fit.slope == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("emit_plotdata bundles curves and rejects bad inputs") {
    TempDir dir("riskscape_plot_test");
    CHECK_THROWS_AS(emit_plotdata({}, (dir.path / "out.csv").string()), InvalidInput);
    const auto c1 = (dir.path / "curve1.csv").string();
    std::ofstream(c1) << "a,b\n1,2\n";
    const auto out = (dir.path / "bundle.csv").string();
    emit_plotdata({c1}, out);
    const std::string text = slurp(out);
    CHECK(text.find("curve,row") != std::string::npos);
    CHECK(text.find("curve1,a,b") != std::string::npos);
    CHECK(text.find("curve1,1,2") != std::string::npos);
    CHECK_THROWS_AS(emit_plotdata({(dir.path / "missing.csv").string()}, out), InvalidInput);
}

TEST_CASE("unknown experiment id and invalid counts are rejected before work") {
    TempDir dir("riskscape_exp_bad");
    CHECK_THROWS_AS(run_experiment(Json{{"experiment", "fig99"}}, dir.path.string(), 1), InvalidInput);
    CHECK_THROWS_AS(run_experiment(Json::object(), dir.path.string(), 1), InvalidInput);
    Json cfg = {{"experiment", "fig3a"}, {"instances", 0}};
    CHECK_THROWS_AS(run_experiment(cfg, dir.path.string(), 1), InvalidInput);
}

TEST_CASE("mini fig3a run: schema, monotone trend, manifest completeness") {
    TempDir dir("riskscape_fig3a_mini");
    Json cfg = {{"experiment", "fig3a"}, {"d", {8}}, {"ratio", {0.4, 6.0}},
                {"instances", 4},        {"inits", 3}, {"kmax", 600}};
    const ExperimentResult result = run_experiment(cfg, dir.path.string(), 7);
    CHECK(result.n_failures == 0);
    REQUIRE(!result.curve_files.empty());
    const std::string text = slurp(result.curve_files.front());
    CHECK(text.rfind("d,ratio,n,success_rate,success_rate_smooth,n_instances", 0) == 0);

    // success at the large-sample end should not fall below the tiny-sample end
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    std::vector<double> rates;
    while (std::getline(is, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rates.push_back(std::stod(cells[3]));
    }
    REQUIRE(rates.size() == 2);
    CHECK(rates[1] >= rates[0]);
    CHECK(rates[1] >= 0.75);  // well-sampled regime succeeds

    const Json manifest = Json::parse(slurp(result.manifest_file));
    CHECK(manifest["experiment"] == "fig3a");
    CHECK(manifest["master_seed"] == 7);
    CHECK(manifest.contains("instance_seeds"));
    CHECK(manifest["config"]["instances"] == 4);
    CHECK(manifest.contains("wall_time_s"));
    CHECK(!result.plotdata_file.empty());
    CHECK(fs::exists(result.plotdata_file));
}

TEST_CASE("experiment output bytes are identical across thread counts") {
    const int saved = max_threads();
    Json cfg = {{"experiment", "fig8b"}, {"d", 8.0}, {"n", 60.0}, {"sigma2_out", {1.0, 25.0}},
                {"reps", 3},             {"kmax", 300}};
    TempDir d1("riskscape_det_t1");
    TempDir d8("riskscape_det_t8");
    set_max_threads(1);
    const ExperimentResult r1 = run_experiment(cfg, d1.path.string(), 99);
    set_max_threads(8);
    const ExperimentResult r8 = run_experiment(cfg, d8.path.string(), 99);
    set_max_threads(saved);
    REQUIRE(r1.curve_files.size() == r8.curve_files.size());
    for (std::size_t i = 0; i < r1.curve_files.size(); ++i)
        CHECK(slurp(r1.curve_files[i]) == slurp(r8.curve_files[i]));
}

TEST_CASE("morse-cert experiment emits the expected verdicts") {
    TempDir dir("riskscape_morse");
    Json cfg = {{"experiment", "morse-cert"}, {"budget", 5000.0}};
    const ExperimentResult result = run_experiment(cfg, dir.path.string(), 3);
    const std::string text = slurp(result.curve_files.front());
    CHECK(text.find("quadratic,") != std::string::npos);
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    int rows = 0;
    while (std::getline(is, line)) {
        std::stringstream ss(line);
        std::vector<std::string> cells;
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        REQUIRE(cells.size() == 8);
        const bool holds = cells[3] == "1";
        if (cells[0] == "quadratic") CHECK(holds);
        if (cells[0] == "constant") {
            CHECK_FALSE(holds);
            CHECK(std::stol(cells[4]) > 0);  // witnesses reported
        }
        if (cells[0] == "saddle") {
            CHECK(holds);
            CHECK(cells[7] == "1");  // the index-1 point was found
        }
        ++rows;
    }
    CHECK(rows == 3);
}

TEST_CASE("experiment ids all resolve to defaults") {
    for (const auto& id : experiment_ids()) {
        const Json defaults = experiment_defaults(id);
        CHECK(defaults.is_object());
    }
    CHECK_THROWS_AS(experiment_defaults("nope"), InvalidInput);
}
