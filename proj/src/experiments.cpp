#include "ladderwalk/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "ladderwalk/analytic.hpp"
#include "ladderwalk/coupling.hpp"
#include "ladderwalk/env.hpp"
#include "ladderwalk/regen.hpp"
#include "ladderwalk/renewal.hpp"
#include "ladderwalk/rice.hpp"
#include "ladderwalk/rng.hpp"
#include "ladderwalk/stats.hpp"
#include "ladderwalk/traps.hpp"
#include "ladderwalk/walk.hpp"

namespace ladderwalk::experiments {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void parallel_for(std::int64_t n, int workers, const std::function<void(std::int64_t)>& fn) {
    workers = std::max(1, workers);
    if (workers == 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    std::atomic<bool> failed{false};
    std::string error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::int64_t i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    fn(i);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    failed.store(true);
                    if (error.empty()) error = e.what();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failed.load()) throw std::runtime_error("parallel_for: " + error);
}

std::string ExperimentConfig::get(const std::string& key, const std::string& fallback) const {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

double ExperimentConfig::get_double(const std::string& key, double fallback) const {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stod(it->second);
}

std::int64_t ExperimentConfig::get_int(const std::string& key, std::int64_t fallback) const {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stoll(it->second);
}

std::vector<double> ExperimentConfig::get_list(const std::string& key,
                                               const std::vector<double>& fallback) const {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

double ExperimentConfig::resolve_lambda(double p) const {
    if (has("lambda")) return get_double("lambda", 0.0);
    const double lc = analytic::critical_bias(p);
    if (has("lambda_mult")) return get_double("lambda_mult", 1.0) * lc;
    if (has("alpha")) return lc / get_double("alpha", 1.0);
    return lc;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    ExperimentConfig cfg;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        if (key == "experiment") cfg.experiment = value;
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "workers") cfg.workers = std::stoi(value);
        else if (key == "out") cfg.out_dir = value;
        else cfg.kv[key] = value;
    }
    return cfg;
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {
        "oracle",       "sample-env",  "trap-law", "walk",  "regen-tails",
        "critical-speed", "fluctuations", "coupling-check", "rice", "renewal"};
    return names;
}

namespace {

std::uint64_t experiment_id(const std::string& name) {
    const auto& names = experiment_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i + 1;
    throw std::runtime_error("unknown experiment: " + name);
}

struct RunContext {
    ExperimentConfig cfg;
    json summary;
    std::vector<std::string> outputs;
    int exit_code = 0;

    fs::path out_path(const std::string& name) {
        outputs.push_back(name);
        return fs::path(cfg.out_dir) / name;
    }
};

void write_manifest(RunContext& ctx, double wall_seconds) {
    json manifest;
    manifest["experiment"] = ctx.cfg.experiment;
    manifest["code_version"] = kCodeVersion;
    manifest["seed"] = ctx.cfg.seed;
    manifest["workers"] = ctx.cfg.workers;
    json kv;
    for (const auto& [k, v] : ctx.cfg.kv) kv[k] = v;
    manifest["config"] = kv;
    manifest["wall_time_s"] = wall_seconds;
    manifest["outputs"] = ctx.outputs;
    std::ofstream out(fs::path(ctx.cfg.out_dir) / "manifest.json");
    out << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

void run_oracle(RunContext& ctx) {
    const double p = ctx.cfg.get_double("p", 0.5);
    const double lambda = ctx.cfg.resolve_lambda(p);
    const auto b = analytic::bias_params(p, lambda);
    const std::int64_t m_max = ctx.cfg.get_int("m_max", 8);
    std::ofstream out(ctx.out_path("oracle.txt"));
    auto emit = [&](const std::string& name, double value) {
        out << name << '=' << fmt_double(value) << '\n';
        ctx.summary[name] = value;
    };
    emit("p", b.p);
    emit("lambda", b.lambda);
    emit("lambda_c", b.lambda_c);
    emit("alpha", b.alpha);
    emit("p_lambda", b.p_lambda);
    emit("q_lambda", b.q_lambda);
    emit("gamma", b.gamma);
    emit("p_esc", b.p_esc);
    emit("R", b.big_r);
    emit("lambda_star", b.lambda_star);
    out << "above_lambda_star=" << (b.above_lambda_star ? 1 : 0) << '\n';
    for (std::int64_t m = 1; m <= m_max; ++m) {
        const auto r = analytic::ruin_quantities(m, lambda);
        emit("e_" + std::to_string(m), r.e_m);
        emit("e_prime_" + std::to_string(m), r.e_prime_m);
        emit("hit_bottom_" + std::to_string(m), r.hit_bottom);
        emit("trap_pmf_" + std::to_string(m), analytic::trap_length_pmf(m, p));
    }
    const auto eb = analytic::pruned_energy_bound(lambda);
    emit("pruned_energy", eb.energy);
    emit("pruned_escape_lower_bound", eb.escape_lower_bound);
    const std::int64_t L = ctx.cfg.get_int("L", 3);
    const auto ot = analytic::obstacle_transitions(lambda, L);
    for (int i = 0; i < 7; ++i)
        emit("obstacle_move_" + std::to_string(i) + "_L" + std::to_string(L), ot.prob[i]);
    out << "obstacle_valid_L" << L << '=' << (ot.valid ? 1 : 0) << '\n';
    ctx.summary["obstacle_valid"] = ot.valid;
}

void run_sample_env(RunContext& ctx) {
    const double p = ctx.cfg.get_double("p", 0.5);
    const std::int64_t extent = ctx.cfg.get_int("extent", 200);
    const auto chain = build_column_chain(p);
    Rng rng = Rng::substream(ctx.cfg.seed, experiment_id("sample-env"), 0);
    Environment env = sample_environment(chain, rng, extent);
    {
        std::ofstream out(ctx.out_path("env.txt"));
        write_env_text(env, out);
    }
    {
        std::ofstream out(ctx.out_path("traps.csv"));
        out << "index,x_entrance,rail,length,x_bottom\n";
        const auto traps = enumerate_traps(env);
        std::int64_t idx = 0;
        for (const auto& piece : traps) {
            if (piece.censored) continue;
            out << idx++ << ',' << piece.x_entrance << ',' << piece.rail << ',' << piece.length
                << ',' << piece.x_bottom << '\n';
        }
        ctx.summary["traps"] = idx;
    }
    ctx.summary["x_lo"] = env.x_lo;
    ctx.summary["x_hi"] = env.x_hi();
    ctx.summary["cycles"] = env.cycle_boundaries.size() - 1;
}

void run_trap_law(RunContext& ctx) {
    const double p = ctx.cfg.get_double("p", 0.5);
    const std::int64_t target = ctx.cfg.get_int("samples", 100000);
    const auto chain = build_column_chain(p);
    const int workers = ctx.cfg.workers;
    const std::int64_t shards = std::max<std::int64_t>(workers * 4, 8);
    std::vector<std::vector<std::int64_t>> lengths(static_cast<std::size_t>(shards));
    const std::int64_t per_shard = (target + shards - 1) / shards;
    parallel_for(shards, workers, [&](std::int64_t s) {
        Rng rng = Rng::substream(ctx.cfg.seed, experiment_id("trap-law"), static_cast<std::uint64_t>(s));
        auto& bucket = lengths[static_cast<std::size_t>(s)];
        while (static_cast<std::int64_t>(bucket.size()) < per_shard) {
            Cycle cycle = sample_cycle(chain, rng);
            Environment probe;
            probe.p = p;
            probe.x_lo = 0;
            probe.cols = cycle.cols;
            probe.cols.push_back(kPatternCol);
            for (const auto& piece : enumerate_traps(probe))
                if (!piece.censored) bucket.push_back(piece.length);
        }
    });
    std::vector<std::int64_t> all;
    for (const auto& b : lengths) all.insert(all.end(), b.begin(), b.end());
    all.resize(static_cast<std::size_t>(std::min<std::int64_t>(
        static_cast<std::int64_t>(all.size()), std::max(target, per_shard * shards))));

    std::int64_t max_len = 1;
    for (auto l : all) max_len = std::max(max_len, l);
    std::vector<std::int64_t> hist(static_cast<std::size_t>(max_len) + 1, 0);
    for (auto l : all) ++hist[static_cast<std::size_t>(l)];
    {
        std::ofstream out(ctx.out_path("trap_hist.csv"));
        out << "length,count,expected\n";
        for (std::int64_t m = 1; m <= max_len; ++m)
            out << m << ',' << hist[static_cast<std::size_t>(m)] << ','
                << fmt_double(static_cast<double>(all.size()) * analytic::trap_length_pmf(m, p))
                << '\n';
    }
    // Chi-square with a pooled tail bin (expected count >= ~20).
    const double n = static_cast<double>(all.size());
    std::vector<double> observed, expected;
    double tail_obs = 0.0, tail_exp = n;
    for (std::int64_t m = 1;; ++m) {
        const double e = n * analytic::trap_length_pmf(m, p);
        if (tail_exp - e < 20.0 || m > max_len) {
            for (std::int64_t j = m; j <= max_len; ++j)
                tail_obs += static_cast<double>(hist[static_cast<std::size_t>(j)]);
            observed.push_back(tail_obs);
            expected.push_back(tail_exp);
            break;
        }
        observed.push_back(static_cast<double>(hist[static_cast<std::size_t>(m)]));
        expected.push_back(e);
        tail_exp -= e;
    }
    const auto chi = stats::chi_square_gof(observed, expected);
    ctx.summary["samples"] = all.size();
    ctx.summary["chi_square"] = chi.statistic;
    ctx.summary["df"] = chi.df;
    ctx.summary["p_value"] = chi.p_value;
    if (chi.p_value <= 0.01) ctx.exit_code = 1;
}

struct WalkGridResult {
    std::vector<std::vector<std::int64_t>> x_at;  // [replica][n_idx]
    std::vector<std::int64_t> min_x, time_in_traps;
};

WalkGridResult run_walk_grid(double p, double lambda, const std::vector<std::int64_t>& n_grid,
                             std::int64_t replicas, std::uint64_t seed, std::uint64_t expid,
                             int workers, bool track_traps) {
    const auto chain = build_column_chain(p);
    WalkGridResult out;
    out.x_at.assign(static_cast<std::size_t>(replicas),
                    std::vector<std::int64_t>(n_grid.size(), 0));
    out.min_x.assign(static_cast<std::size_t>(replicas), 0);
    out.time_in_traps.assign(static_cast<std::size_t>(replicas), 0);
    parallel_for(replicas, workers, [&](std::int64_t r) {
        Rng rng = Rng::substream(seed, expid, static_cast<std::uint64_t>(r));
        Environment env = sample_environment(chain, rng, 64);
        WalkOptions opts;
        opts.chain = &chain;
        opts.track_traps = track_traps;
        opts.checkpoint_times.assign(n_grid.begin(), n_grid.end());
        Walker walker(env, lambda, rng, opts);
        StopSpec stop;
        stop.horizon = n_grid.back();
        walker.run(stop);
        // record the final checkpoint (time == horizon) if pending
        walker.run(stop);
        const auto& cks = walker.checkpoints();
        for (std::size_t i = 0; i < n_grid.size() && i < cks.size(); ++i)
            out.x_at[static_cast<std::size_t>(r)][i] = cks[i].second;
        out.min_x[static_cast<std::size_t>(r)] = walker.stats().min_x;
        out.time_in_traps[static_cast<std::size_t>(r)] = walker.stats().time_in_traps;
    });
    return out;
}

void run_walk(RunContext& ctx) {
    const double p = ctx.cfg.get_double("p", 0.5);
    const double lambda = ctx.cfg.resolve_lambda(p);
    const std::int64_t horizon = ctx.cfg.get_int("horizon", 100000);
    const std::int64_t replicas = ctx.cfg.get_int("replicas", 100);
    const auto grid_d = ctx.cfg.get_list("checkpoints", {static_cast<double>(horizon)});
    std::vector<std::int64_t> n_grid;
    for (double v : grid_d) n_grid.push_back(static_cast<std::int64_t>(v));
    if (n_grid.empty() || n_grid.back() != horizon) n_grid.push_back(horizon);
    const auto res = run_walk_grid(p, lambda, n_grid, replicas, ctx.cfg.seed,
                                   experiment_id("walk"), ctx.cfg.workers, true);
    std::ofstream out(ctx.out_path("walk.csv"));
    out << "replica,n,X_n,min_x,time_in_traps,horizon_reason\n";
    for (std::int64_t r = 0; r < replicas; ++r)
        for (std::size_t i = 0; i < n_grid.size(); ++i)
            out << r << ',' << n_grid[i] << ',' << res.x_at[static_cast<std::size_t>(r)][i] << ','
                << res.min_x[static_cast<std::size_t>(r)] << ','
                << res.time_in_traps[static_cast<std::size_t>(r)] << ",horizon\n";
    std::vector<double> final_speed;
    for (std::int64_t r = 0; r < replicas; ++r)
        final_speed.push_back(
            static_cast<double>(res.x_at[static_cast<std::size_t>(r)].back()) /
            static_cast<double>(horizon));
    ctx.summary["lambda"] = lambda;
    ctx.summary["mean_speed"] = stats::mean(final_speed);
    ctx.summary["se_speed"] = stats::standard_error(final_speed);
}

void run_regen_tails(RunContext& ctx) {
    const double p = ctx.cfg.get_double("p", 0.5);
    const double lambda = ctx.cfg.resolve_lambda(p);
    const std::int64_t samples = ctx.cfg.get_int("samples", 100000);
    regen::IncrementSamplerConfig scfg;
    scfg.p = p;
    scfg.lambda = lambda;
    scfg.delta = ctx.cfg.get_int("delta", 200);
    scfg.horizon = ctx.cfg.get_int("horizon", 1000000);
    const auto chain = build_column_chain(p);

    std::vector<regen::IncrementSample> rows(static_cast<std::size_t>(samples));
    std::vector<std::int64_t> attempts(static_cast<std::size_t>(samples));
    parallel_for(samples, ctx.cfg.workers, [&](std::int64_t r) {
        Rng rng = Rng::substream(ctx.cfg.seed, experiment_id("regen-tails"),
                                 static_cast<std::uint64_t>(r));
        auto draw = regen::sample_regeneration_increment(chain, scfg, rng);
        rows[static_cast<std::size_t>(r)] = draw.sample;
        attempts[static_cast<std::size_t>(r)] = draw.attempts;
    });
    {
        std::ofstream out(ctx.out_path("increments.csv"));
        out << "replica,tau_inc,rho_inc,law_tag,censored\n";
        for (std::int64_t r = 0; r < samples; ++r) {
            const auto& s = rows[static_cast<std::size_t>(r)];
            out << r << ',' << fmt_double(s.tau_inc) << ',' << fmt_double(s.rho_inc) << ','
                << regen::law_tag_name(s.law_tag) << ',' << (s.censored ? 1 : 0) << '\n';
        }
    }
    std::vector<double> taus;
    std::int64_t total_attempts = 0, censored = 0;
    for (std::int64_t r = 0; r < samples; ++r) {
        taus.push_back(std::max(1.0, rows[static_cast<std::size_t>(r)].tau_inc));
        total_attempts += attempts[static_cast<std::size_t>(r)];
        censored += rows[static_cast<std::size_t>(r)].censored ? 1 : 0;
    }
    Rng boot = Rng::substream(ctx.cfg.seed, experiment_id("regen-tails"), 0xb007);
    json tails;
    tails["alpha_target"] = analytic::critical_bias(p) / lambda;
    tails["acceptance_rate"] =
        static_cast<double>(samples) / static_cast<double>(std::max<std::int64_t>(1, total_attempts));
    tails["censored"] = censored;
    try {
        const double slope = regen::loglog_ccdf_slope(taus, 1e2, 1e4);
        tails["ccdf_slope_1e2_1e4"] = slope;
    } catch (const std::exception& e) {
        tails["ccdf_slope_1e2_1e4"] = nullptr;
        tails["ccdf_slope_error"] = e.what();
    }
    for (auto method : {regen::TailMethod::kLogLogRegression, regen::TailMethod::kHill}) {
        const auto est = regen::tail_index_estimate(taus, method, boot);
        json j;
        j["index"] = est.index;
        j["ci_lo"] = est.ci_lo;
        j["ci_hi"] = est.ci_hi;
        j["band"] = {est.band_lo, est.band_hi};
        j["light_tail_suspected"] = est.light_tail_suspected;
        tails[method == regen::TailMethod::kHill ? "hill" : "loglog_regression"] = j;
    }
    std::ofstream out(ctx.out_path("tails.json"));
    out << tails.dump(2) << '\n';
    ctx.summary = tails;
}

void run_critical_speed(RunContext& ctx) {
    const double p = ctx.cfg.get_double("p", 0.5);
    const double lambda = ctx.cfg.has("lambda") || ctx.cfg.has("alpha") || ctx.cfg.has("lambda_mult")
                              ? ctx.cfg.resolve_lambda(p)
                              : analytic::critical_bias(p);
    const std::int64_t replicas = ctx.cfg.get_int("replicas", 200);
    const auto grid_d = ctx.cfg.get_list("n_grid", {1e4, 1e5, 1e6});
    std::vector<std::int64_t> n_grid;
    for (double v : grid_d) n_grid.push_back(static_cast<std::int64_t>(v));
    const auto res = run_walk_grid(p, lambda, n_grid, replicas, ctx.cfg.seed,
                                   experiment_id("critical-speed"), ctx.cfg.workers, false);
    {
        std::ofstream out(ctx.out_path("speed.csv"));
        out << "replica,n,X_n\n";
        for (std::int64_t r = 0; r < replicas; ++r)
            for (std::size_t i = 0; i < n_grid.size(); ++i)
                out << r << ',' << n_grid[i] << ','
                    << res.x_at[static_cast<std::size_t>(r)][i] << '\n';
    }
    json medians = json::array();
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        std::vector<double> scaled, raw;
        for (std::int64_t r = 0; r < replicas; ++r) {
            const double x = static_cast<double>(res.x_at[static_cast<std::size_t>(r)][i]);
            const double n = static_cast<double>(n_grid[i]);
            scaled.push_back(x * std::log(n) / n);
            raw.push_back(x / n);
        }
        json j;
        j["n"] = n_grid[i];
        j["median_x_logn_over_n"] = stats::median(scaled);
        j["median_x_over_n"] = stats::median(raw);
        medians.push_back(j);
    }
    ctx.summary["lambda"] = lambda;
    ctx.summary["medians"] = medians;
}

void run_fluctuations(RunContext& ctx) {
    const double p = ctx.cfg.get_double("p", 0.5);
    const double alpha = ctx.cfg.get_double("alpha", 2.0);
    const double lambda = analytic::critical_bias(p) / alpha;
    const std::int64_t replicas = ctx.cfg.get_int("replicas", 200);
    const auto grid_d = ctx.cfg.get_list("n_grid", {1e4, 1e5, 1e6});
    std::vector<std::int64_t> n_grid;
    for (double v : grid_d) n_grid.push_back(static_cast<std::int64_t>(v));
    const auto res = run_walk_grid(p, lambda, n_grid, replicas, ctx.cfg.seed,
                                   experiment_id("fluctuations"), ctx.cfg.workers, false);

    // v-hat from the largest horizon (IQRs are centering-invariant; emitted for
    // the normalized table only).
    std::vector<double> speeds;
    for (std::int64_t r = 0; r < replicas; ++r)
        speeds.push_back(static_cast<double>(res.x_at[static_cast<std::size_t>(r)].back()) /
                         static_cast<double>(n_grid.back()));
    const double v_hat = alpha <= 1.0 ? 0.0 : stats::mean(speeds);

    auto a_n = [&](double n) {
        if (alpha == 2.0) return std::sqrt(n * std::log(n));
        if (alpha > 1.0) return std::pow(n, 1.0 / alpha);
        return std::pow(n, alpha);
    };
    {
        std::ofstream out(ctx.out_path("fluct.csv"));
        out << "replica,n,X_n,normalized\n";
        for (std::int64_t r = 0; r < replicas; ++r)
            for (std::size_t i = 0; i < n_grid.size(); ++i) {
                const double n = static_cast<double>(n_grid[i]);
                const double x = static_cast<double>(res.x_at[static_cast<std::size_t>(r)][i]);
                const double z = alpha > 1.0 ? (x - n * v_hat) / a_n(n) : x / a_n(n);
                out << r << ',' << n_grid[i] << ',' << static_cast<std::int64_t>(x) << ','
                    << fmt_double(z) << '\n';
            }
    }
    json iqrs = json::array();
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        std::vector<double> xs;
        for (std::int64_t r = 0; r < replicas; ++r)
            xs.push_back(static_cast<double>(res.x_at[static_cast<std::size_t>(r)][i]));
        const double n = static_cast<double>(n_grid[i]);
        json j;
        j["n"] = n_grid[i];
        j["iqr_normalized"] = stats::iqr(xs) / a_n(n);
        iqrs.push_back(j);
    }
    ctx.summary["alpha"] = alpha;
    ctx.summary["lambda"] = lambda;
    ctx.summary["v_hat"] = v_hat;
    ctx.summary["iqrs"] = iqrs;
}

void run_coupling_check(RunContext& ctx) {
    const double p = ctx.cfg.get_double("p", 0.5);
    const double lambda = ctx.cfg.resolve_lambda(p);
    const std::int64_t replicas = ctx.cfg.get_int("replicas", 20);
    const std::int64_t horizon = ctx.cfg.get_int("horizon", 20000);
    const std::int64_t max_trap = ctx.cfg.get_int("max_trap_length", -1);
    const auto chain = build_column_chain(p);

    json per_replica = json::array();
    std::atomic<std::int64_t> violations{0};
    std::vector<json> rows(static_cast<std::size_t>(replicas));
    parallel_for(replicas, ctx.cfg.workers, [&](std::int64_t r) {
        Rng rng = Rng::substream(ctx.cfg.seed, experiment_id("coupling-check"),
                                 static_cast<std::uint64_t>(r));
        coupling::CoupledBuildConfig bcfg;
        bcfg.p = p;
        bcfg.lambda = lambda;
        bcfg.max_trap_length = max_trap;
        coupling::CoupledEnvironment cenv(chain, bcfg, rng);
        const auto run = coupling::run_coupled(cenv, rng, horizon);
        const auto report = coupling::check_visit_domination(cenv, run);
        violations += report.violations;
        json j;
        j["replica"] = r;
        j["case_counts"] = run.case_counts;
        j["checked_vertices"] = report.checked_vertices;
        j["violations"] = report.violations;
        rows[static_cast<std::size_t>(r)] = j;
    });
    for (auto& j : rows) per_replica.push_back(j);
    json audit;
    audit["lambda"] = lambda;
    audit["p"] = p;
    audit["max_trap_length"] = max_trap;
    audit["replicas"] = per_replica;
    audit["total_violations"] = violations.load();
    std::ofstream out(ctx.out_path("coupling_audit.json"));
    out << audit.dump(2) << '\n';
    ctx.summary = audit;
    if (violations.load() > 0) ctx.exit_code = 1;
}

void run_rice(RunContext& ctx) {
    const double p = ctx.cfg.get_double("p", 0.5);
    const double lambda = ctx.cfg.resolve_lambda(p);
    auto grid = ctx.cfg.get_list("n0_grid", {});
    if (grid.empty())
        for (double n0 = 10.0; n0 <= 10000.0 * 1.0001; n0 *= std::pow(10.0, 0.125))
            grid.push_back(n0);
    const auto simple = rice::make_rice_config(p, lambda, rice::Variant::kSimple);
    const auto squared = rice::make_rice_config(p, lambda, rice::Variant::kSquared);
    std::ofstream out(ctx.out_path("rice_profile.csv"));
    out << "n0,S_simple,S_squared,normalized_simple,normalized_squared,route_disagreement\n";
    double max_disagreement = 0.0;
    for (double n0 : grid) {
        const double s1 = rice::alt_sum_geometric(n0, simple);
        const double s2 = rice::alt_sum_geometric(n0, squared);
        const double norm = std::pow(n0, simple.alpha);
        double disagreement = 0.0;
        const auto n0i = static_cast<std::int64_t>(std::llround(n0));
        if (std::fabs(n0 - static_cast<double>(n0i)) < 1e-9 && n0i <= simple.direct_cap) {
            const double direct = rice::alt_sum_direct(n0i, simple);
            disagreement = std::fabs(direct - s1) / std::max(1e-300, std::fabs(direct));
            max_disagreement = std::max(max_disagreement, disagreement);
        }
        out << fmt_double(n0) << ',' << fmt_double(s1) << ',' << fmt_double(s2) << ','
            << fmt_double(s1 * norm) << ',' << fmt_double(s2 * norm / std::log(n0)) << ','
            << fmt_double(disagreement) << '\n';
    }
    ctx.summary["alpha"] = simple.alpha;
    ctx.summary["t"] = simple.t;
    ctx.summary["mu_hat"] = simple.mu_hat;
    ctx.summary["max_route_disagreement"] = max_disagreement;
}

void run_renewal(RunContext& ctx) {
    const double alpha = ctx.cfg.get_double("alpha", 1.5);
    const double d = ctx.cfg.get_double("d", 1.0);
    const double theta = ctx.cfg.get_double("theta", 1.0);
    const double p_neg = ctx.cfg.get_double("p_neg", 1.2);
    const int replicas = static_cast<int>(ctx.cfg.get_int("replicas", 10000));
    const bool misnormalized = ctx.cfg.get_int("misnormalized", 0) != 0;
    auto t_grid = ctx.cfg.get_list("t_grid", {1e2, 1e3, 1e4, 1e5});
    auto spec = renewal::make_renewal_spec(alpha, d);
    spec.misnormalized = misnormalized;
    const auto rows = renewal::ui_profile(spec, t_grid, theta, p_neg, replicas,
                                          ctx.cfg.seed ^ 0x72656e65ull, ctx.cfg.workers);
    std::ofstream out(ctx.out_path("renewal_profile.csv"));
    out << "t,statistic,value,ci_lo,ci_hi\n";
    for (const auto& row : rows) {
        out << fmt_double(row.t) << ",exp_moment," << fmt_double(row.exp_moment) << ','
            << fmt_double(row.exp_lo) << ',' << fmt_double(row.exp_hi) << '\n';
        out << fmt_double(row.t) << ",neg_moment," << fmt_double(row.neg_moment) << ','
            << fmt_double(row.neg_lo) << ',' << fmt_double(row.neg_hi) << '\n';
    }
    ctx.summary["alpha"] = alpha;
    ctx.summary["mu"] = spec.mu;
    ctx.summary["misnormalized"] = misnormalized;
}

}  // namespace

int run_experiment(ExperimentConfig cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(cfg.out_dir);
    RunContext ctx{std::move(cfg), json::object(), {}, 0};
    const std::string& name = ctx.cfg.experiment;
    try {
        if (name == "oracle") run_oracle(ctx);
        else if (name == "sample-env") run_sample_env(ctx);
        else if (name == "trap-law") run_trap_law(ctx);
        else if (name == "walk") run_walk(ctx);
        else if (name == "regen-tails") run_regen_tails(ctx);
        else if (name == "critical-speed") run_critical_speed(ctx);
        else if (name == "fluctuations") run_fluctuations(ctx);
        else if (name == "coupling-check") run_coupling_check(ctx);
        else if (name == "rice") run_rice(ctx);
        else if (name == "renewal") run_renewal(ctx);
        else throw std::runtime_error("unknown experiment: " + name);
    } catch (const std::exception& e) {
        ctx.summary["error"] = e.what();
        ctx.exit_code = 2;
    }
    {
        std::ofstream out(fs::path(ctx.cfg.out_dir) / "summary.json");
        out << ctx.summary.dump(2) << '\n';
        ctx.outputs.push_back("summary.json");
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(ctx, wall);
    return ctx.exit_code;
}

}  // namespace ladderwalk::experiments
