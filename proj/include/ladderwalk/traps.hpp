// Trap inventory, backbone extraction, and the pruned environment with
// obstacles and merged conductances.
#pragma once

#include <cstdint>
#include <vector>

#include "ladderwalk/env.hpp"

namespace ladderwalk {

// A trap of length m with entrance u_0 = (x_entrance, rail): the open run
// u_0..u_m on `rail`, closed beyond the bottom, interior verticals closed,
// parallel run plus entrance vertical open. The piece is
// [x_entrance, x_entrance + length + 1). Pieces touching the window edge
// before their end could be verified are reported with censored = true.
struct TrapPiece {
    std::int64_t x_entrance = 0;
    int rail = 0;  // rail carrying the dead end (0 = bottom, 1 = top)
    std::int64_t length = 0;
    std::int64_t x_bottom = 0;
    bool censored = false;

    std::int64_t piece_lo() const { return x_entrance; }
    std::int64_t piece_hi() const { return x_entrance + length + 1; }  // exclusive
};

// Complete left-to-right inventory (censored pieces included, flagged).
std::vector<TrapPiece> enumerate_traps(const Environment& env);

// The environment with all trap runs deleted (trap entrances kept).
Environment extract_backbone(const Environment& env);

// Fast (level, rail) -> trap-node classification for walk ledgers.
class TrapIndex {
  public:
    TrapIndex() = default;
    explicit TrapIndex(const Environment& env) { rebuild(env); }

    void rebuild(const Environment& env);
    // Re-enumerate traps on [from_x, env.x_hi()] after the environment grew.
    void extend_right(const Environment& env, std::int64_t from_x);

    const std::vector<TrapPiece>& pieces() const { return pieces_; }

    // >= 0: index of the piece whose dead end contains (x, y); -1 otherwise.
    int piece_at(std::int64_t x, int y) const {
        if (x < x_lo_ || x >= x_lo_ + static_cast<std::int64_t>(code_.size())) return -1;
        const std::uint32_t c = code_[static_cast<std::size_t>(x - x_lo_)];
        if (c == 0 || static_cast<int>(c & 1u) != y) return -1;
        return static_cast<int>(c >> 1) - 1;
    }

  private:
    void index_piece(std::size_t piece_idx);
    std::int64_t x_lo_ = 0;
    std::vector<std::uint32_t> code_;  // ((piece+1) << 1) | rail, 0 = none
    std::vector<TrapPiece> pieces_;
};

// Trap pieces replaced by obstacles; x-levels are compacted so that each piece
// collapses onto its entrance level. The merged edge appears as the open
// horizontal on the obstacle rail at the obstacle level.
struct PrunedEnvironment {
    struct Obstacle {
        std::int64_t x = 0;       // compacted level
        int rail = 0;             // rail of the obstacle vertex (opposite the trap)
        std::int64_t trap_length = 0;
        std::int64_t orig_x_entrance = 0;
        double r_series = 0.0;  // series resistance of the merged edge, original coordinates
    };

    Environment base;  // compacted columns
    double lambda = 0.0;
    std::vector<Obstacle> obstacles;        // sorted by x
    std::vector<std::int64_t> orig_levels;  // original level of each compacted level

    // Number of obstacles with compacted coordinate in [0, x).
    std::int64_t obstacles_before(std::int64_t x) const;
    const Obstacle* obstacle_at(std::int64_t x, int rail) const;
    std::int64_t orig_of_new(std::int64_t x_new) const;
    std::int64_t new_of_orig(std::int64_t x_orig) const;  // -1 if the level was deleted
};

// Requires an inventory free of censored pieces (throws MarginError otherwise).
PrunedEnvironment prune_environment(const Environment& env, double lambda);

// Conductances c^p of the pruned walk. Horizontal edge from (x, rail) to
// (x+1, rail); vertical edge at x.
double pruned_conductance_horizontal(const PrunedEnvironment& pe, std::int64_t x, double lambda);
double pruned_conductance_vertical(const PrunedEnvironment& pe, std::int64_t x, double lambda);

}  // namespace ladderwalk
