// ladderwalk CLI: reproducible experiments on the biased ladder-graph walk.
//
//   ladderwalk <subcommand> --config <file> [--seed S] [--workers W] [--out DIR]
//
// Subcommands mirror the experiment names; the config file is a flat
// key=value list (see docs/config.md).
#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "ladderwalk/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"simulation laboratory for biased random walk on the conditioned ladder-graph "
                 "percolation cluster"};
    app.require_subcommand(1);

    struct SubArgs {
        std::string config;
        std::int64_t seed = -1;
        int workers = -1;
        std::string out;
    };
    std::vector<std::pair<CLI::App*, SubArgs>> subs;
    subs.reserve(ladderwalk::experiments::experiment_names().size());
    for (const auto& name : ladderwalk::experiments::experiment_names()) {
        auto* sub = app.add_subcommand(name, name + " experiment");
        subs.emplace_back(sub, SubArgs{});
        auto& args = subs.back().second;
        sub->add_option("--config", args.config, "key=value config file");
        sub->add_option("--seed", args.seed, "seed override");
        sub->add_option("--workers", args.workers, "worker thread count");
        sub->add_option("--out", args.out, "output directory");
    }

    CLI11_PARSE(app, argc, argv);

    for (auto& [sub, args] : subs) {
        if (!sub->parsed()) continue;
        ladderwalk::experiments::ExperimentConfig cfg;
        try {
            if (!args.config.empty()) cfg = ladderwalk::experiments::load_config(args.config);
            cfg.experiment = sub->get_name();
            if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
            if (args.workers > 0) cfg.workers = args.workers;
            if (!args.out.empty()) cfg.out_dir = args.out;
            return ladderwalk::experiments::run_experiment(std::move(cfg));
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 2;
        }
    }
    return 2;
}
