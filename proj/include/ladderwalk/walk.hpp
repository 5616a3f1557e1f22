// The quenched lazy biased walk on a percolation environment, the line-graph
// excursion chains, and an exact k-step transition-kernel oracle for small
// windows.
//
// One uniform variate is consumed per step (the candidate draw); whether the
// step is performed is a deterministic function of the environment. Visits are
// counted per time index, so lazy stays at a vertex count as further visits.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ladderwalk/env.hpp"
#include "ladderwalk/errors.hpp"
#include "ladderwalk/rng.hpp"
#include "ladderwalk/traps.hpp"

namespace ladderwalk {

struct Vertex {
    std::int64_t x = 0;
    int y = 0;
    bool operator==(const Vertex&) const = default;
};

struct TransitionProbs {
    double right = 0.0, left = 0.0, vertical = 0.0, stay = 0.0;
};

// Candidate probabilities (e^l, e^-l, 1)/(e^l+1+e^-l) with the mass of closed
// candidates moved to stay. Needs columns x-1 and x (margin error otherwise).
TransitionProbs quenched_transition(const Environment& env, double lambda, Vertex v);

enum class StopReason { kHorizon, kXThreshold, kReturnToOrigin };

struct StopSpec {
    std::int64_t horizon = -1;                   // stop when time >= horizon (if >= 0)
    std::optional<std::int64_t> x_threshold;     // stop when x >= threshold
    bool on_return_to_origin = false;            // stop when position == (0,0) at time >= 1
};

struct WalkStats {
    Vertex position{0, 0};
    std::int64_t time = 0;
    std::int64_t min_x = 0, max_x = 0;
    std::int64_t time_in_traps = 0;
    std::vector<std::int64_t> trap_ledger;  // aligned with TrapIndex::pieces()
};

struct LevelHit {
    std::int64_t level = 0;
    std::int64_t time = 0;
};

struct Trajectory {
    WalkStats stats;
    StopReason reason = StopReason::kHorizon;
    std::vector<Vertex> positions;                           // full record when enabled
    std::vector<std::pair<std::int64_t, std::int64_t>> checkpoints;  // (time, X_time)
};

struct WalkOptions {
    Vertex start{0, 0};
    bool record_positions = false;
    bool track_traps = false;
    bool track_boundary_visits = false;      // per-time-index hits at cycle boundaries (y = 0)
    const ColumnChain* chain = nullptr;      // enables lazy extension by fresh cycles
    std::vector<std::int64_t> checkpoint_times;  // sorted times at which X is recorded
};

class Walker {
  public:
    Walker(Environment& env, double lambda, Rng& rng, WalkOptions opts = {});

    // Continues the walk until a stop condition fires; may be called repeatedly.
    StopReason run(const StopSpec& stop);

    void step_once();

    const WalkStats& stats() const { return stats_; }
    const Environment& env() const { return *env_; }
    const TrapIndex& trap_index() const { return traps_; }
    const std::vector<LevelHit>& boundary_hits() const { return hits_; }
    const std::vector<Vertex>& positions() const { return positions_; }
    const std::vector<std::pair<std::int64_t, std::int64_t>>& checkpoints() const {
        return checkpoints_;
    }

    Trajectory take_trajectory(StopReason reason);

  private:
    void ensure_margins();
    void refresh_flags(std::int64_t from_boundary_index);

    Environment* env_;
    Rng* rng_;
    double lambda_;
    double thr_right_, thr_left_;  // candidate thresholds on the unit interval
    WalkOptions opts_;
    WalkStats stats_;
    TrapIndex traps_;
    std::vector<std::uint8_t> boundary_flag_;  // aligned with env cols
    std::size_t consumed_boundaries_ = 0;
    std::vector<LevelHit> hits_;
    std::vector<Vertex> positions_;
    std::vector<std::pair<std::int64_t, std::int64_t>> checkpoints_;
    std::size_t next_checkpoint_ = 0;
};

// Convenience wrapper: fresh walker, one run.
Trajectory simulate_walk(Environment& env, double lambda, Rng& rng, const StopSpec& stop,
                         WalkOptions opts = {});

// ---------------------------------------------------------------------------
// Line-graph excursion chains on {0, ..., m} started at 1 (0 absorbing).

struct ExcursionResult {
    std::int64_t duration = 0;      // steps until absorption at 0
    bool reached_bottom = false;    // hit m before 0
    std::int64_t bottom_returns = 0;  // returns to m (stays at m included)
};

ExcursionResult simulate_trap_excursion(std::int64_t m, double lambda, Rng& rng, bool lazy);

// ---------------------------------------------------------------------------
// Exact k-step distribution on a finite window via dense kernel application.

struct KStepDistribution {
    std::int64_t x_lo = 0;
    std::vector<double> prob;  // index = 2*(x - x_lo) + y
    double exit_mass = 0.0;    // candidate mass that left the window (flagged absorbing)

    double at(std::int64_t x, int y) const {
        return prob[static_cast<std::size_t>(2 * (x - x_lo) + y)];
    }
};

KStepDistribution exact_k_step_distribution(const Environment& env, double lambda, Vertex start,
                                            int k, int cap = 16, double exit_tol = 1e-15);

}  // namespace ladderwalk
