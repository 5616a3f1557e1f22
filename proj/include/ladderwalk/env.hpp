// Percolation environments on the ladder graph Z x {0,1}.
//
// An environment stores one 3-bit column record per x-level (top horizontal
// x->x+1, bottom horizontal x->x+1, vertical at x). Environments are sampled
// either under the cycle-stationary law (exactly, by running the Doob
// h-transform of the 3-state rail-connectivity column chain between
// pre-regeneration patterns) or by window rejection, which doubles as the
// independent oracle for the Doob sampler.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ladderwalk/errors.hpp"
#include "ladderwalk/rng.hpp"

namespace ladderwalk {

inline constexpr std::uint8_t kTopBit = 1;     // top horizontal x -> x+1
inline constexpr std::uint8_t kBottomBit = 2;  // bottom horizontal x -> x+1
inline constexpr std::uint8_t kVertBit = 4;    // vertical at x

// The boundary pattern column at a pre-regeneration level: top horizontal and
// vertical closed, bottom horizontal open.
inline constexpr std::uint8_t kPatternCol = kBottomBit;

enum class Provenance { kCycleStationary, kWindowRejection, kHandcrafted };

const char* provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

struct Environment {
    double p = 0.5;
    Provenance provenance = Provenance::kHandcrafted;
    std::int64_t x_lo = 0;
    std::vector<std::uint8_t> cols;               // one record per level, cols[0] at x_lo
    std::vector<std::int64_t> cycle_boundaries;   // nonnegative pre-regeneration levels (cycle-stationary)

    std::int64_t x_hi() const { return x_lo + static_cast<std::int64_t>(cols.size()) - 1; }
    bool in_range(std::int64_t x) const { return x >= x_lo && x <= x_hi(); }

    std::uint8_t col(std::int64_t x) const {
        if (!in_range(x)) throw MarginError("column " + std::to_string(x) + " outside window");
        return cols[static_cast<std::size_t>(x - x_lo)];
    }
    bool top(std::int64_t x) const { return col(x) & kTopBit; }
    bool bottom(std::int64_t x) const { return col(x) & kBottomBit; }
    bool vertical(std::int64_t x) const { return col(x) & kVertBit; }
    // rail 0 = bottom, rail 1 = top
    bool horizontal(std::int64_t x, int rail) const { return col(x) & (rail ? kTopBit : kBottomBit); }
};

// ---------------------------------------------------------------------------
// Connectivity within the window (exact, BFS over open edges).

// reach.left[i] / reach.right[i]: bitmask (1 << y) of rails at level x_lo+i
// connected to the left / right window boundary.
struct ReachSets {
    std::vector<std::uint8_t> left, right;
};
ReachSets reach_sets(const Environment& env);

// Open left-right crossing of the whole window exists.
bool has_crossing(const Environment& env);

// Vertex lies on the window's spanning cluster (connected to both boundaries).
bool vertex_in_cluster(const Environment& env, std::int64_t x, int y);

// ---------------------------------------------------------------------------
// Column-state chain and its Doob h-transform.

// Live states of the rail-connectivity summary.
enum RailState : int { kStateTop = 0, kStateBottom = 1, kStateBoth = 2 };

struct ColumnChain {
    double p = 0.5;
    double perron_root = 0.0;
    double h[3] = {0, 0, 0};  // Perron right eigenvector, h[kStateBoth] = 1
    int next[3][8] = {};      // successor state or -1 (dead)
    double doob[3][8] = {};   // Doob-transformed emission probabilities
    double doob_cdf[3][8] = {};
};

ColumnChain build_column_chain(double p);

// Raw (unconditioned) transition of the live-state scan: returns -1 when dead.
int column_chain_step(int state, std::uint8_t col);

struct Cycle {
    // cols[0] is the boundary pattern column; the cycle spans levels
    // [boundary, boundary + cols.size()).
    std::vector<std::uint8_t> cols;
    std::int64_t length() const { return static_cast<std::int64_t>(cols.size()); }
};

// One environment cycle between consecutive pre-regeneration points, sampled
// from the Doob chain started in the post-pattern state.
Cycle sample_cycle(const ColumnChain& chain, Rng& rng, std::int64_t max_columns = 1000000);

// Cycle-stationary environment: i.i.d. cycles rightward from x = 0 until the
// window reaches `min_x_hi` (and at least one cycle); `left_margin_cycles`
// cycles are tiled leftward of 0. The window always ends at a boundary whose
// pattern column is included.
Environment sample_environment(const ColumnChain& chain, Rng& rng, std::int64_t min_x_hi,
                               int left_margin_cycles = 1);

// Append cycles on the right until x_hi >= target (no-op if already there).
void extend_right_cycles(Environment& env, const ColumnChain& chain, Rng& rng, std::int64_t target_x_hi);
// Tile cycles on the left until x_lo <= target.
void extend_left_cycles(Environment& env, const ColumnChain& chain, Rng& rng, std::int64_t target_x_lo);

// ---------------------------------------------------------------------------
// Window-rejection oracle.

struct WindowRejectionResult {
    Environment env;
    std::int64_t attempts = 0;
};

// Repeatedly samples i.i.d. columns on [-N, N] and accepts when an open
// left-right crossing exists and (0,0) lies on it. Throws BudgetError when the
// attempt budget is exhausted.
WindowRejectionResult sample_window_rejection(double p, std::int64_t N, Rng& rng,
                                              std::int64_t max_attempts = 100000000);

// ---------------------------------------------------------------------------
// Pre-regeneration points.

// All levels x in [x_lo+1, x_hi] where (x,0) is on the spanning cluster and
// (x,1) is isolated (both flanking top horizontals and the vertical closed).
std::vector<std::int64_t> find_pre_regeneration_points(const Environment& env);

// ---------------------------------------------------------------------------
// Text serialization (docs/formats.md).

void write_env_text(const Environment& env, std::ostream& os);
Environment read_env_text(std::istream& is);

}  // namespace ladderwalk
