// Regeneration detection, annealed increment sampling, tail-index estimation,
// and renewal counting.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ladderwalk/env.hpp"
#include "ladderwalk/rng.hpp"
#include "ladderwalk/walk.hpp"

namespace ladderwalk::regen {

enum class LawTag { kFirstIncrementUnderP, kGenericIncrement, kCircConditioned };
const char* law_tag_name(LawTag tag);

struct RegenerationRecord {
    std::vector<std::int64_t> rho;  // x-coordinates, strictly increasing
    std::vector<std::int64_t> tau;  // unique visit times, strictly increasing in lockstep
    std::vector<bool> censored;     // certificate horizon-limited
    LawTag law_tag = LawTag::kCircConditioned;
};

// Pre-regeneration levels > 0 visited exactly once (per time index) by a walk
// run with track_boundary_visits. An entry is censored unless the walk ended
// at least `delta` beyond it. delta < 0 encodes an unobtainable certificate
// (everything censored).
RegenerationRecord detect_regenerations(const Walker& walker, std::int64_t delta);

struct IncrementSample {
    double tau_inc = 0.0;
    double rho_inc = 0.0;
    bool censored = false;
    LawTag law_tag = LawTag::kGenericIncrement;
};

struct IncrementSamplerConfig {
    double p = 0.5;
    double lambda = 1.0;
    std::int64_t delta = 200;        // certificate margin
    std::int64_t horizon = 1000000;  // per-attempt step cap (censored-accept at the cap)
    std::int64_t max_rejections = 1000000;
};

struct IncrementDraw {
    IncrementSample sample;
    std::int64_t attempts = 0;  // trajectories consumed, accepted one included
};

// One draw of (tau_2 - tau_1, rho_2 - rho_1): cycle-stationary environment,
// walk from 0, trajectories that return to the origin rejected.
IncrementDraw sample_regeneration_increment(const ColumnChain& chain,
                                            const IncrementSamplerConfig& cfg, Rng& rng);

struct WindowFirstConfig {
    double p = 0.9;
    double lambda = 1.0;
    std::int64_t window_half_width = 60;
    std::int64_t delta = 30;
    std::int64_t horizon = 1000000;
    std::int64_t max_attempts = 100000000;  // window rejection budget
};

// tau_1 under the window-conditioned law P (no conditioning on the walk).
IncrementSample sample_first_increment_window(const WindowFirstConfig& cfg, Rng& rng);

enum class TailMethod { kLogLogRegression, kHill };

struct TailEstimate {
    double index = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    TailMethod method = TailMethod::kLogLogRegression;
    double band_lo = 0.90, band_hi = 0.999;  // quantile band (log-log method)
    int k_top = 0;                           // order statistics used (Hill)
    bool light_tail_suspected = false;
};

// Requires >= 1000 samples; throws std::invalid_argument on degenerate input.
TailEstimate tail_index_estimate(std::span<const double> samples, TailMethod method, Rng& rng,
                                 double band_lo = 0.90, double band_hi = 0.999, int k_top = -1);

// Least-squares slope of log CCDF vs log n over an explicit n-range; grid
// points with fewer than `min_count` exceedances are dropped.
double loglog_ccdf_slope(std::span<const double> samples, double n_lo, double n_hi,
                         int points_per_decade = 12, int min_count = 10);

struct RenewalCounts {
    std::int64_t k_n = 0;   // max{k : tau_k <= n}
    std::int64_t nu_n = 1;  // k_n + 1
};
RenewalCounts renewal_counts(std::span<const std::int64_t> tau, std::int64_t n);

}  // namespace ladderwalk::regen
