#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ladderwalk/analytic.hpp"
#include "ladderwalk/env.hpp"
#include "ladderwalk/stats.hpp"
#include "ladderwalk/traps.hpp"
#include "ladderwalk/walk.hpp"

using namespace ladderwalk;

namespace {

Environment make_env(std::int64_t x_lo, const std::vector<std::uint8_t>& cols) {
    Environment env;
    env.p = 0.5;
    env.provenance = Provenance::kHandcrafted;
    env.x_lo = x_lo;
    env.cols = cols;
    return env;
}

std::uint8_t bits(bool top, bool bottom, bool vert) {
    return static_cast<std::uint8_t>((top ? kTopBit : 0) | (bottom ? kBottomBit : 0) |
                                     (vert ? kVertBit : 0));
}

Environment all_open(std::int64_t x_lo, std::int64_t x_hi) {
    return make_env(x_lo,
                    std::vector<std::uint8_t>(static_cast<std::size_t>(x_hi - x_lo + 1),
                                              bits(true, true, true)));
}

}  // namespace

TEST_CASE("quenched transition distributions") {
    const double lambda = 0.8;
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double norm = el + 1.0 + eml;

    // all incident edges open
    Environment open_env = all_open(-2, 2);
    const auto t_open = quenched_transition(open_env, lambda, {0, 0});
    CHECK(t_open.right == doctest::Approx(el / norm).epsilon(1e-14));
    CHECK(t_open.left == doctest::Approx(eml / norm).epsilon(1e-14));
    CHECK(t_open.vertical == doctest::Approx(1.0 / norm).epsilon(1e-14));
    CHECK(t_open.stay == doctest::Approx(0.0));

    // all incident edges closed
    Environment closed_env = make_env(-2, std::vector<std::uint8_t>(5, 0));
    const auto t_closed = quenched_transition(closed_env, lambda, {0, 1});
    CHECK(t_closed.stay == doctest::Approx(1.0));

    // trap bottom: only the left edge open
    std::vector<std::uint8_t> cols = {bits(true, true, false), bits(true, true, true),
                                      bits(true, true, false), bits(true, false, false),
                                      bits(true, true, true)};
    Environment trap_env = make_env(-1, cols);
    const auto t_bottom = quenched_transition(trap_env, lambda, {2, 0});
    CHECK(t_bottom.stay == doctest::Approx((el + 1.0) / norm).epsilon(1e-14));
    CHECK(t_bottom.left == doctest::Approx(eml / norm).epsilon(1e-14));

    // mass is exactly one at every vertex with margins
    for (std::int64_t x = 0; x <= 3; ++x)
        for (int y = 0; y < 2; ++y) {
            const auto t = quenched_transition(trap_env, lambda, {x, y});
            CHECK(t.right + t.left + t.vertical + t.stay == doctest::Approx(1.0).epsilon(1e-14));
        }
    CHECK_THROWS_AS(quenched_transition(trap_env, lambda, {-1, 0}), MarginError);
}

TEST_CASE("drift on a fully open ladder") {
    const double lambda = 3.0;
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double drift = (el - eml) / (el + 1.0 + eml);
    const std::int64_t horizon = 200000;
    Environment env = all_open(-50, horizon + 50);
    Rng rng(42);
    StopSpec stop;
    stop.horizon = horizon;
    const auto traj = simulate_walk(env, lambda, rng, stop);
    REQUIRE(traj.reason == StopReason::kHorizon);
    const double speed = static_cast<double>(traj.stats.position.x) / static_cast<double>(horizon);
    const double step_var = (el + eml) / (el + 1.0 + eml) - drift * drift;
    const double se = std::sqrt(step_var / static_cast<double>(horizon));
    CHECK(std::fabs(speed - drift) < 3.0 * se + 1e-12);
}

TEST_CASE("escape frequency at pre-regeneration points dominates p_esc") {
    const double p = 0.5;
    const double lambda = analytic::critical_bias(p) / 2.0;
    const double p_esc = analytic::bias_params(p, lambda).p_esc;
    const auto chain = build_column_chain(p);
    Rng rng(7);
    const int replicas = 2500;
    int escaped = 0;
    for (int r = 0; r < replicas; ++r) {
        Environment env = sample_environment(chain, rng, 16);
        WalkOptions opts;
        opts.chain = &chain;
        StopSpec stop;
        stop.on_return_to_origin = true;
        stop.x_threshold = 150;
        Walker walker(env, lambda, rng, opts);
        if (walker.run(stop) == StopReason::kXThreshold) ++escaped;
    }
    const double freq = static_cast<double>(escaped) / replicas;
    const double se = std::sqrt(freq * (1.0 - freq) / replicas);
    CHECK(freq >= p_esc - 3.0 * se);
}

TEST_CASE("time ledger partitions total time exactly") {
    const auto chain = build_column_chain(0.5);
    Rng rng(13);
    Environment env = sample_environment(chain, rng, 64);
    WalkOptions opts;
    opts.chain = &chain;
    opts.track_traps = true;
    opts.record_positions = true;
    Walker walker(env, 0.9, rng, opts);
    StopSpec stop;
    stop.horizon = 20000;
    walker.run(stop);
    const auto& stats = walker.stats();
    std::int64_t ledger_sum = 0;
    for (auto v : stats.trap_ledger) ledger_sum += v;
    CHECK(stats.time_in_traps == ledger_sum);
    CHECK(stats.time == stop.horizon);

    // independent recomputation from the recorded positions
    TrapIndex index(walker.env());
    std::int64_t recount = 0;
    const auto& pos = walker.positions();
    for (std::size_t k = 0; k + 1 < pos.size(); ++k)
        if (index.piece_at(pos[k].x, pos[k].y) >= 0) ++recount;
    CHECK(recount == stats.time_in_traps);
}

TEST_CASE("transience diagnostics at lambda >= lambda_c/2") {
    const auto chain = build_column_chain(0.5);
    const double lambda = analytic::critical_bias(0.5) / 2.0;
    for (int r = 0; r < 4; ++r) {
        Rng rng(100 + r);
        Environment env = sample_environment(chain, rng, 64);
        WalkOptions opts;
        opts.chain = &chain;
        Walker walker(env, lambda, rng, opts);
        StopSpec stop;
        stop.horizon = 100000;
        walker.run(stop);
        const std::int64_t mid_max = walker.stats().max_x;
        stop.horizon = 200000;
        walker.run(stop);
        CHECK(walker.stats().max_x > mid_max);  // no stagnation over the final half
    }
}

TEST_CASE("trap excursions: absorption statistics") {
    Rng rng(2);
    const double lambda = 0.5;
    const std::int64_t m = 5;
    const auto ruin = analytic::ruin_quantities(m, lambda);
    const int n = 40000;
    int reached = 0;
    double returns_given_reached = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto r = simulate_trap_excursion(m, lambda, rng, /*lazy=*/false);
        if (r.reached_bottom) {
            ++reached;
            returns_given_reached += static_cast<double>(r.bottom_returns);
        }
    }
    const double hit_freq = static_cast<double>(reached) / n;
    const double hit_se = std::sqrt(hit_freq * (1.0 - hit_freq) / n);
    CHECK(std::fabs(hit_freq - ruin.hit_bottom) < 3.0 * hit_se);

    // bottom returns are geometric with success e_m
    const double mean_returns = returns_given_reached / reached;
    const double geo_mean = (1.0 - ruin.e_m) / ruin.e_m;
    const double geo_sd = std::sqrt(1.0 - ruin.e_m) / ruin.e_m;
    CHECK(std::fabs(mean_returns - geo_mean) < 3.0 * geo_sd / std::sqrt(static_cast<double>(reached)));

    // direct Monte Carlo of escape-without-rebound from the bottom
    int escapes = 0;
    const int trials = 40000;
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double p_right = el / (el + eml);
    for (int i = 0; i < trials; ++i) {
        std::int64_t pos = m;
        // one step from the bottom, then run to absorption at 0 or return to m
        bool escaped = false;
        if (rng.uniform() >= p_right) {
            pos = m - 1;
            while (pos != 0 && pos != m) pos += rng.uniform() < p_right ? 1 : -1;
            escaped = pos == 0;
        }
        if (escaped) ++escapes;
    }
    const double esc_freq = static_cast<double>(escapes) / trials;
    const double esc_se = std::sqrt(esc_freq * (1.0 - esc_freq) / trials);
    CHECK(std::fabs(esc_freq - ruin.e_m) < 3.0 * esc_se);
}

TEST_CASE("m = 1 bookkeeping and the lazy chain") {
    Rng rng(3);
    // non-lazy m = 1: duration = 1 + bottom_returns (each stay at the bottom
    // is one step and one return)
    for (int i = 0; i < 2000; ++i) {
        const auto r = simulate_trap_excursion(1, 0.7, rng, false);
        CHECK(r.duration == 1 + r.bottom_returns);
        CHECK(r.reached_bottom);  // the walk starts at the bottom cell
    }
    // hit-bottom probability is laziness-invariant
    const std::int64_t m = 4;
    const double lambda = 0.6;
    const auto ruin = analytic::ruin_quantities(m, lambda);
    const int n = 30000;
    int lazy_reached = 0;
    for (int i = 0; i < n; ++i)
        if (simulate_trap_excursion(m, lambda, rng, true).reached_bottom) ++lazy_reached;
    const double freq = static_cast<double>(lazy_reached) / n;
    const double se = std::sqrt(freq * (1.0 - freq) / n);
    CHECK(std::fabs(freq - ruin.hit_bottom) < 3.0 * se);

    // lazy duration stochastically dominates the non-lazy duration
    std::vector<double> lazy_durations, plain_durations;
    for (int i = 0; i < 30000; ++i) {
        lazy_durations.push_back(
            static_cast<double>(simulate_trap_excursion(m, lambda, rng, true).duration));
        plain_durations.push_back(
            static_cast<double>(simulate_trap_excursion(m, lambda, rng, false).duration));
    }
    std::sort(lazy_durations.begin(), lazy_durations.end());
    std::sort(plain_durations.begin(), plain_durations.end());
    for (double t : {2.0, 5.0, 10.0, 25.0, 60.0}) {
        const double f_lazy =
            static_cast<double>(std::upper_bound(lazy_durations.begin(), lazy_durations.end(), t) -
                                lazy_durations.begin()) /
            static_cast<double>(lazy_durations.size());
        const double f_plain =
            static_cast<double>(
                std::upper_bound(plain_durations.begin(), plain_durations.end(), t) -
                plain_durations.begin()) /
            static_cast<double>(plain_durations.size());
        CHECK(f_lazy <= f_plain + 0.02);
    }
}

TEST_CASE("exact k-step distribution") {
    // walled 10-column window: closed outermost horizontals
    std::vector<std::uint8_t> cols;
    cols.push_back(bits(false, false, true));  // x = 0 wall
    for (int i = 1; i <= 8; ++i) cols.push_back(bits(true, i % 3 != 0, i % 2 == 0));
    cols.back() = bits(false, false, true);  // x = 9... adjusted below
    cols.push_back(bits(false, false, true));
    Environment env = make_env(0, cols);
    // make the interior walls: last interior column must not lead out
    env.cols[8] = bits(false, false, true);

    const double lambda = 0.9;
    const Vertex start{4, 0};
    const auto d0 = exact_k_step_distribution(env, lambda, start, 0);
    CHECK(d0.at(4, 0) == doctest::Approx(1.0));

    for (int k : {1, 4, 8}) {
        const auto dk = exact_k_step_distribution(env, lambda, start, k);
        double mass = 0.0;
        for (double v : dk.prob) mass += v;
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(dk.exit_mass <= 1e-15);
    }

    // Monte Carlo agreement at k = 8
    const auto d8 = exact_k_step_distribution(env, lambda, start, 8);
    const int replicas = 400000;
    std::vector<double> freq(d8.prob.size(), 0.0);
    Rng rng(77);
    for (int r = 0; r < replicas; ++r) {
        Environment copy = env;
        Rng step_rng(rng.next_u64());
        WalkOptions opts;
        opts.start = start;
        Walker walker(copy, lambda, step_rng, opts);
        StopSpec stop;
        stop.horizon = 8;
        walker.run(stop);
        freq[static_cast<std::size_t>(2 * (walker.stats().position.x - env.x_lo) +
                                      walker.stats().position.y)] += 1.0;
    }
    for (std::size_t i = 0; i < freq.size(); ++i) {
        const double f = freq[i] / replicas;
        const double se = std::sqrt(std::max(d8.prob[i] * (1.0 - d8.prob[i]), 1e-9) / replicas);
        CHECK(std::fabs(f - d8.prob[i]) < 5.0 * se + 2.0 / replicas);
    }

    // cap and window-exit contracts
    CHECK_THROWS_AS(exact_k_step_distribution(env, lambda, start, 20), std::domain_error);
    Environment leaky = all_open(0, 9);
    CHECK_THROWS_AS(exact_k_step_distribution(leaky, lambda, {4, 0}, 8), WindowExitError);
}

TEST_CASE("window exit without extension") {
    Environment env = all_open(-2, 6);
    Rng rng(5);
    StopSpec stop;
    stop.horizon = 1000;
    CHECK_THROWS_AS(simulate_walk(env, 2.0, rng, stop), WindowExitError);
}
