#include "ladderwalk/regen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "ladderwalk/stats.hpp"

namespace ladderwalk::regen {

const char* law_tag_name(LawTag tag) {
    switch (tag) {
        case LawTag::kFirstIncrementUnderP: return "first_increment_under_P";
        case LawTag::kGenericIncrement: return "generic_increment";
        case LawTag::kCircConditioned: return "circ_conditioned";
    }
    return "generic_increment";
}

RegenerationRecord detect_regenerations(const Walker& walker, std::int64_t delta) {
    RegenerationRecord rec;
    std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> by_level;  // level -> (count, first time)
    for (const LevelHit& hit : walker.boundary_hits()) {
        auto [it, fresh] = by_level.try_emplace(hit.level, 0, hit.time);
        ++it->second.first;
    }
    const std::int64_t final_x = walker.stats().position.x;
    for (const auto& [level, info] : by_level) {
        if (level <= 0) continue;
        if (info.first != 1) continue;
        rec.rho.push_back(level);
        rec.tau.push_back(info.second);
        rec.censored.push_back(delta < 0 || final_x - level < delta);
    }
    return rec;
}

namespace {

// Streaming candidate tracker: smallest boundary level > 0 visited exactly once.
class CandidateTracker {
  public:
    // Consumes new hits; returns true if counts changed.
    void consume(const std::vector<LevelHit>& hits) {
        while (consumed_ < hits.size()) {
            const LevelHit& h = hits[consumed_++];
            if (h.level > 0) {
                auto [it, fresh] = counts_.try_emplace(h.level, 0, h.time);
                ++it->second.first;
            }
        }
    }

    // Smallest level > 0 with exactly one visit, or -1.
    std::int64_t candidate(std::int64_t& first_time_out) const {
        for (const auto& [level, info] : counts_) {
            if (info.first == 1) {
                first_time_out = info.second;
                return level;
            }
        }
        return -1;
    }

  private:
    std::size_t consumed_ = 0;
    std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> counts_;
};

// Runs one trajectory until rejection (return to origin), certification, or
// the horizon. Returns true when a (possibly censored) sample was produced.
bool run_one_attempt(Environment& env, const ColumnChain* chain, double lambda, Rng& rng,
                     std::int64_t delta, std::int64_t horizon, bool reject_on_return,
                     IncrementSample& out) {
    WalkOptions opts;
    opts.track_boundary_visits = true;
    opts.chain = chain;
    Walker walker(env, lambda, rng, opts);
    CandidateTracker tracker;
    StopSpec stop;
    stop.horizon = horizon;
    stop.on_return_to_origin = reject_on_return;
    stop.x_threshold = delta + 1;
    for (;;) {
        const StopReason reason = walker.run(stop);
        if (reason == StopReason::kReturnToOrigin) return false;
        tracker.consume(walker.boundary_hits());
        std::int64_t first_time = 0;
        const std::int64_t cand = tracker.candidate(first_time);
        if (reason == StopReason::kHorizon) {
            out.censored = true;
            out.tau_inc = static_cast<double>(cand >= 0 ? first_time : horizon);
            out.rho_inc = static_cast<double>(cand >= 0 ? cand : 0);
            return true;
        }
        // x-threshold reached: certify or push the threshold further out.
        if (cand >= 0 && walker.stats().position.x >= cand + delta) {
            out.censored = false;
            out.tau_inc = static_cast<double>(first_time);
            out.rho_inc = static_cast<double>(cand);
            return true;
        }
        stop.x_threshold = (cand >= 0 ? cand : walker.stats().position.x + 1) + delta;
    }
}

}  // namespace

IncrementDraw sample_regeneration_increment(const ColumnChain& chain,
                                            const IncrementSamplerConfig& cfg, Rng& rng) {
    IncrementDraw draw;
    for (draw.attempts = 1; draw.attempts <= cfg.max_rejections; ++draw.attempts) {
        Environment env = sample_environment(chain, rng, 16);
        IncrementSample sample;
        sample.law_tag = LawTag::kGenericIncrement;
        if (run_one_attempt(env, &chain, cfg.lambda, rng, cfg.delta, cfg.horizon,
                            /*reject_on_return=*/true, sample)) {
            draw.sample = sample;
            return draw;
        }
    }
    throw BudgetError("sample_regeneration_increment: rejected " +
                      std::to_string(cfg.max_rejections) + " trajectories");
}

IncrementSample sample_first_increment_window(const WindowFirstConfig& cfg, Rng& rng) {
    auto rejection = sample_window_rejection(cfg.p, cfg.window_half_width, rng, cfg.max_attempts);
    Environment& env = rejection.env;
    env.cycle_boundaries = find_pre_regeneration_points(env);
    IncrementSample sample;
    sample.law_tag = LawTag::kFirstIncrementUnderP;

    WalkOptions opts;
    opts.track_boundary_visits = true;
    Walker walker(env, cfg.lambda, rng, opts);
    CandidateTracker tracker;
    StopSpec stop;
    stop.horizon = cfg.horizon;
    stop.x_threshold = cfg.window_half_width - 1;  // stay clear of the window edge
    StopReason reason = StopReason::kHorizon;
    try {
        reason = walker.run(stop);
    } catch (const WindowExitError&) {
        // Drifted into the left window edge; certify nothing from this point on.
        reason = StopReason::kHorizon;
    }
    tracker.consume(walker.boundary_hits());
    std::int64_t first_time = 0;
    const std::int64_t cand = tracker.candidate(first_time);
    if (cand < 0) {
        sample.censored = true;
        sample.tau_inc = static_cast<double>(cfg.horizon);
        sample.rho_inc = 0.0;
        return sample;
    }
    sample.tau_inc = static_cast<double>(first_time);
    sample.rho_inc = static_cast<double>(cand);
    sample.censored =
        reason == StopReason::kHorizon || walker.stats().position.x - cand < cfg.delta;
    return sample;
}

TailEstimate tail_index_estimate(std::span<const double> samples, TailMethod method, Rng& rng,
                                 double band_lo, double band_hi, int k_top) {
    if (samples.size() < 1000)
        throw std::invalid_argument("tail_index_estimate: need >= 1000 samples");
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    if (*mn == *mx) throw std::invalid_argument("tail_index_estimate: degenerate sample");
    if (*mn <= 0.0) throw std::invalid_argument("tail_index_estimate: samples must be positive");

    TailEstimate est;
    est.method = method;
    est.band_lo = band_lo;
    est.band_hi = band_hi;

    if (method == TailMethod::kHill) {
        std::vector<double> sorted(samples.begin(), samples.end());
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        const int k = k_top > 0 ? k_top
                                : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(samples.size()))));
        est.k_top = k;
        double acc = 0.0;
        for (int i = 0; i < k; ++i) acc += std::log(sorted[static_cast<std::size_t>(i)] /
                                                    sorted[static_cast<std::size_t>(k)]);
        est.index = static_cast<double>(k) / acc;
        const double se = est.index / std::sqrt(static_cast<double>(k));
        est.ci_lo = est.index - 1.96 * se;
        est.ci_hi = est.index + 1.96 * se;
    } else {
        auto slope_fit = [&](std::span<const double> xs) {
            const double lo = stats::quantile(xs, band_lo);
            const double hi = stats::quantile(xs, band_hi);
            if (!(hi > lo) || lo <= 0.0) return 0.0;
            return -loglog_ccdf_slope(xs, lo, hi, 16, 5);
        };
        est.index = slope_fit(samples);
        auto ci = stats::bootstrap_ci(samples, slope_fit, 200, 0.95, rng);
        est.ci_lo = ci.lo;
        est.ci_hi = ci.hi;
    }
    est.light_tail_suspected = est.index > 3.0;
    return est;
}

double loglog_ccdf_slope(std::span<const double> samples, double n_lo, double n_hi,
                         int points_per_decade, int min_count) {
    if (!(n_hi > n_lo) || n_lo <= 0.0)
        throw std::invalid_argument("loglog_ccdf_slope: bad range");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double decades = std::log10(n_hi / n_lo);
    const int npts = std::max(3, static_cast<int>(std::floor(decades * points_per_decade)) + 1);
    std::vector<double> lx, ly;
    for (int i = 0; i < npts; ++i) {
        const double n = n_lo * std::pow(n_hi / n_lo, static_cast<double>(i) / (npts - 1));
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), n);
        const std::int64_t count = static_cast<std::int64_t>(sorted.end() - it);
        if (count < min_count) break;
        lx.push_back(std::log(n));
        ly.push_back(std::log(static_cast<double>(count) / static_cast<double>(sorted.size())));
    }
    if (lx.size() < 3) throw std::invalid_argument("loglog_ccdf_slope: too few usable grid points");
    return stats::fit_line(lx, ly).slope;
}

RenewalCounts renewal_counts(std::span<const std::int64_t> tau, std::int64_t n) {
    RenewalCounts rc;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        if (i > 0 && tau[i] <= tau[i - 1])
            throw std::invalid_argument("renewal_counts: tau must be strictly increasing");
        if (tau[i] <= n) rc.k_n = static_cast<std::int64_t>(i) + 1;
    }
    rc.nu_n = rc.k_n + 1;
    return rc;
}

}  // namespace ladderwalk::regen
