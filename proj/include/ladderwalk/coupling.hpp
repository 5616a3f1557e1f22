// The joint chain of the pruned walk and the full walk: trap re-insertion,
// the five transition cases, marginal extraction along the proper-time sets,
// visit-domination audits, and exact finite-window kernels for both marginals.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ladderwalk/analytic.hpp"
#include "ladderwalk/env.hpp"
#include "ladderwalk/rng.hpp"
#include "ladderwalk/traps.hpp"
#include "ladderwalk/walk.hpp"

namespace ladderwalk::coupling {

enum class Case : int { k1 = 0, k2 = 1, k3 = 2, k4 = 3, k5 = 4 };

struct CouplingState {
    Vertex u;   // vertex of the pruned environment (compacted coordinates)
    Vertex v;   // vertex of the re-inserted environment (tilde coordinates)
    int w = 0;  // exit-side memory, meaningful only while v is inside a piece
};

// Empirical origin-coin data for window-law builds: the probability that the
// origin belongs to the first nonnegative trap piece rather than the interior
// of the origin-covering one, plus resampling draws for the tails branch.
struct OriginCoin {
    double prob_heads = 0.0;  // P(0 in T1 | 0 in T1 or int(T0))
    double se = 0.0;
    std::int64_t n_conditional = 0;  // samples behind the estimate
    struct TailsDraw {
        std::int64_t length = 0;  // ell_0
        std::int64_t offset = 0;  // horizontal position of 0 inside the piece, 1..length
        int y = 0;                // rail of the origin vertex
    };
    std::vector<TailsDraw> tails_draws;
};

OriginCoin estimate_origin_coin(double p, std::int64_t window_half_width,
                                std::int64_t target_conditional_samples, Rng& rng,
                                std::int64_t max_windows = 100000000);

struct CoupledBuildConfig {
    double p = 0.5;
    double lambda = 0.37;
    std::int64_t min_x_hi = 256;        // initial source-environment extent
    std::int64_t max_trap_length = -1;  // >= 1: condition all trap lengths (environment and
                                        // re-inserted) on <= this bound; -1: unrestricted
    bool require_valid_cases = true;    // throw at build time on an invalid case-(2) vector;
                                        // pruned-walk-only runs may disable this (the joint
                                        // chain then refuses to step at such an obstacle)
};

class CoupledEnvironment {
  public:
    struct Piece {
        std::int64_t x0 = 0;      // tilde level of the entrance/obstacle column
        std::int64_t length = 0;  // re-inserted trap length L_i
        int rail_trap = 0;        // rail of the re-inserted dead end
        std::int64_t obstacle_x_pruned = 0;
        analytic::ObstacleTransitions moves;  // validated case-(2) seven-vector
        std::array<double, 7> cdf{};
    };

    // Cycle-stationary build (the origin is never deleted).
    CoupledEnvironment(const ColumnChain& chain, const CoupledBuildConfig& cfg, Rng& rng);

    // Window-law build: source drawn by window rejection; when the pruning
    // assigns the origin obstacle coordinate 0, the origin coin decides the
    // law of L_0 and the horizontal shift.
    CoupledEnvironment(const ColumnChain& chain, const CoupledBuildConfig& cfg,
                       std::int64_t window_half_width, const OriginCoin& coin, Rng& rng);

    // Handcrafted build from an explicit trap-free pruned environment and the
    // per-obstacle lengths (oracle windows). No extension.
    CoupledEnvironment(PrunedEnvironment pruned, std::span<const std::int64_t> lengths);

    void extend_right(Rng& rng, std::int64_t target_tilde_x_hi);
    void extend_left(Rng& rng, std::int64_t target_tilde_x_lo);

    const PrunedEnvironment& pruned() const { return pruned_; }
    const Environment& tilde() const { return tilde_; }
    const std::vector<Piece>& pieces() const { return pieces_; }
    double lambda() const { return lambda_; }

    std::int64_t tilde_of_pruned(std::int64_t xp) const;
    // -1 when the tilde level is piece interior.
    std::int64_t pruned_of_tilde(std::int64_t xt) const;
    const Piece* piece_containing_tilde(std::int64_t xt) const;  // x0 <= xt <= x0+L+1
    bool tilde_interior(std::int64_t xt) const;
    // Piece index owning an interior tilde level index, -1 otherwise.
    std::int32_t piece_index_of_tilde(std::size_t level_index) const {
        return piece_of_tilde_[level_index];
    }

    bool used_origin_coin() const { return used_origin_coin_; }
    bool origin_coin_heads() const { return origin_coin_heads_; }

  private:
    void rebuild();
    void build_tilde();
    std::int64_t draw_length(Rng& rng) const;

    const ColumnChain* chain_ = nullptr;
    CoupledBuildConfig cfg_;
    double lambda_ = 0.0;
    Environment source_;  // the original environment omega (sampled builds only)
    bool has_source_ = false;
    std::map<std::int64_t, std::int64_t> lengths_by_entrance_;  // keyed by source entrance level
    PrunedEnvironment pruned_;
    Environment tilde_;
    std::vector<Piece> pieces_;
    std::vector<std::int64_t> tilde_of_pruned_;   // per pruned level index
    std::vector<std::int64_t> pruned_of_tilde_;   // per tilde level index, -1 interior
    std::vector<std::int32_t> piece_of_tilde_;    // per tilde level index, -1 none
    bool used_origin_coin_ = false;
    bool origin_coin_heads_ = false;
    std::int64_t origin_shift_ = 0;
    std::int64_t origin_tails_length_ = 0;
    std::uint64_t length_rng_state_ = 0;
    Rng rebuild_rng_;
};

// Classification of a state into the five transition cases.
Case classify(const CoupledEnvironment& cenv, const CouplingState& s);

// One step of the joint chain (one uniform variate).
CouplingState coupled_step(const CoupledEnvironment& cenv, const CouplingState& s, Rng& rng);

// ---------------------------------------------------------------------------
// Coupled runs, marginals, domination.

struct CoupledRunResult {
    std::int64_t steps = 0;
    CouplingState final_state;
    std::array<std::int64_t, 5> case_counts{};
    // Marginal visit counts over proper times: full component at tilde
    // vertices restricted to N2, pruned component at pruned vertices
    // restricted to N1. Keys are (x << 1) | y.
    std::map<std::int64_t, std::int64_t> full_visits;
    std::map<std::int64_t, std::int64_t> pruned_visits;
    std::vector<std::int64_t> full_marginal_x;    // X-track of the full component (N2 times)
    std::vector<std::int64_t> pruned_marginal_x;  // X-track of the pruned component (N1 times)
};

CoupledRunResult run_coupled(CoupledEnvironment& cenv, Rng& rng, std::int64_t horizon,
                             bool keep_tracks = false);

struct DominationReport {
    std::int64_t checked_vertices = 0;
    std::int64_t violations = 0;
    struct Violation {
        std::int64_t x;
        int y;
        std::int64_t full_count, pruned_count;
    };
    std::vector<Violation> examples;  // first few
};

DominationReport check_visit_domination(const CoupledEnvironment& cenv,
                                        const CoupledRunResult& run);

// ---------------------------------------------------------------------------
// Pruned walk on its own (used for transience and regeneration diagnostics).

struct PrunedWalkResult {
    Vertex position{0, 0};
    std::int64_t time = 0;
    std::int64_t min_x = 0, max_x = 0;
    std::vector<LevelHit> boundary_hits;  // visits to pruned pre-regeneration levels (y = 0)
    StopReason reason = StopReason::kHorizon;
};

PrunedWalkResult run_pruned_walk(CoupledEnvironment& cenv, Rng& rng, const StopSpec& stop);

// Candidate probabilities of the pruned walk at a vertex (before openness).
struct PrunedCandidates {
    double right = 0.0, left = 0.0, vertical = 0.0;
};
PrunedCandidates pruned_candidates(const PrunedEnvironment& pe, Vertex u, double lambda);

// ---------------------------------------------------------------------------
// Exact finite-window oracles (walled handcrafted windows).

// Distribution of the full component after `k` proper (N2) steps, as a vector
// over tilde vertices (index 2*(x - x_lo) + y).
std::vector<double> exact_coupled_marginal(const CoupledEnvironment& cenv, int k,
                                           bool full_component, double tail_eps = 1e-16);

// Exact k-step distribution of the direct pruned walk on the pruned window.
KStepDistribution pruned_exact_k_step(const PrunedEnvironment& pe, double lambda, Vertex start,
                                      int k, double exit_tol = 1e-15);

}  // namespace ladderwalk::coupling
