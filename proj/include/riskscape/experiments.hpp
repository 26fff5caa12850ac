#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskscape/config.hpp"

namespace riskscape {

struct ExperimentResult {
    std::vector<std::string> curve_files;
    std::string manifest_file;
    std::string plotdata_file;
    long n_jobs = 0;
    long n_failures = 0;
};

// fig3a fig3b fig4a fig4b fig5 fig6 fig7 fig8a fig8b fig9a fig9b morse-cert unif-conv
std::vector<std::string> experiment_ids();
Json experiment_defaults(const std::string& id);

// Validates the config, runs the sweep (parallel over instances, aggregation
// ordered by index), writes per-curve CSVs, a tidy plot bundle and a JSON
// manifest into out_dir. Output bytes depend only on (config, master_seed).
ExperimentResult run_experiment(Json cfg, const std::string& out_dir, std::uint64_t master_seed);

// Concatenates curve CSVs into one long-format CSV with a leading `curve`
// column; throws InvalidInput when the list is empty or a file is missing.
void emit_plotdata(const std::vector<std::string>& curve_files, const std::string& out_path);

// Drops values outside the empirical (lo, hi) quantiles and averages the rest
// (the Fig. 4 aggregation; shared by all convergence-curve experiments).
double quantile_trimmed_mean(std::vector<double> values, double lo = 0.05, double hi = 0.95);

// Cosmetic smoothing of success curves; endpoints keep 2-point averages.
std::vector<double> moving_average3(const std::vector<double>& xs);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace riskscape
