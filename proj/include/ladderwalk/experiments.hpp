// Reproducible experiment orchestration: flat key=value configs, counter-keyed
// RNG substreams, work-stealing replica scheduling with single-writer output,
// CSV/JSON emission, and a manifest per run.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace ladderwalk::experiments {

struct ExperimentConfig {
    std::string experiment;
    std::map<std::string, std::string> kv;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out_dir = "out";

    bool has(const std::string& key) const { return kv.count(key) > 0; }
    std::string get(const std::string& key, const std::string& fallback = "") const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

    // lambda may be given directly, as lambda_mult (multiple of lambda_c(p)),
    // or via alpha (lambda = lambda_c / alpha).
    double resolve_lambda(double p) const;
};

ExperimentConfig load_config(const std::string& path);

// Known experiment names, in the CLI order.
const std::vector<std::string>& experiment_names();

// Runs the experiment, writing outputs plus manifest.json into cfg.out_dir.
// Returns a process exit code (nonzero on invariant violations).
int run_experiment(ExperimentConfig cfg);

// Deterministic double formatting used in every table ("%.17g").
std::string fmt_double(double v);

// Work-stealing loop over [0, n) with `workers` threads.
void parallel_for(std::int64_t n, int workers, const std::function<void(std::int64_t)>& fn);

inline constexpr const char* kCodeVersion = "ladderwalk 1.0.0";

}  // namespace ladderwalk::experiments
