#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ladderwalk/analytic.hpp"
#include "ladderwalk/env.hpp"
#include "ladderwalk/stats.hpp"
#include "ladderwalk/traps.hpp"

using namespace ladderwalk;

namespace {

Environment make_env(std::int64_t x_lo, const std::vector<std::uint8_t>& cols, double p = 0.5) {
    Environment env;
    env.p = p;
    env.provenance = Provenance::kHandcrafted;
    env.x_lo = x_lo;
    env.cols = cols;
    return env;
}

std::uint8_t bits(bool top, bool bottom, bool vert) {
    return static_cast<std::uint8_t>((top ? kTopBit : 0) | (bottom ? kBottomBit : 0) |
                                     (vert ? kVertBit : 0));
}

// The single-trap window: bottom-rail trap of length 4 entered at (0,0),
// bottom at (4,0), parallel top run open, interior verticals closed.
Environment single_trap_window() {
    std::vector<std::uint8_t> cols;
    cols.push_back(bits(true, true, false));   // x = -1 (margin)
    cols.push_back(bits(true, true, true));    // x = 0: entrance, vertical open
    cols.push_back(bits(true, true, false));   // x = 1
    cols.push_back(bits(true, true, false));   // x = 2
    cols.push_back(bits(true, true, false));   // x = 3
    cols.push_back(bits(true, false, false));  // x = 4: bottom run stops
    cols.push_back(bits(true, true, true));    // x = 5 (margin)
    return make_env(-1, cols);
}

// The two-trap configuration of the pruning comparison: coordinates -1..9,
// top horizontals open at {-1,0,1,2,4,5,6,7,8}, bottom at {0,1,3,5,6,7},
// verticals at {0,1,3,4,5}.
Environment pruning_figure_window() {
    std::vector<std::uint8_t> cols;
    auto in = [](std::int64_t x, std::initializer_list<std::int64_t> xs) {
        for (auto v : xs)
            if (v == x) return true;
        return false;
    };
    for (std::int64_t x = -1; x <= 9; ++x) {
        // x = 9 carries the dotted top-rail continuation of the figure
        const bool top = in(x, {-1, 0, 1, 2, 4, 5, 6, 7, 8, 9});
        const bool bottom = in(x, {0, 1, 3, 5, 6, 7});
        const bool vert = in(x, {0, 1, 3, 4, 5});
        cols.push_back(bits(top, bottom, vert));
    }
    return make_env(-1, cols);
}

}  // namespace

TEST_CASE("single-trap window: exactly one trap at the marked vertices") {
    const Environment env = single_trap_window();
    std::vector<TrapPiece> complete, censored;
    for (const auto& piece : enumerate_traps(env))
        (piece.censored ? censored : complete).push_back(piece);
    // the open margin column at the window edge yields incomplete candidates
    for (const auto& piece : censored) CHECK(piece.x_entrance == 5);
    REQUIRE(complete.size() == 1);
    CHECK(complete[0].x_entrance == 0);
    CHECK(complete[0].rail == 0);
    CHECK(complete[0].length == 4);
    CHECK(complete[0].x_bottom == 4);
    CHECK(complete[0].piece_lo() == 0);
    CHECK(complete[0].piece_hi() == 5);
}

TEST_CASE("no traps when every vertical is open") {
    std::vector<std::uint8_t> cols(14, bits(true, true, true));
    cols[5] = bits(true, false, true);
    cols[9] = bits(false, true, true);
    for (const auto& piece : enumerate_traps(make_env(0, cols)))
        CHECK(piece.censored);  // condition 4 unsatisfiable inside the window
}

TEST_CASE("sampled trap inventory matches the geometric law") {
    const auto chain = build_column_chain(0.5);
    Rng rng(11);
    std::vector<std::int64_t> lengths;
    Environment env = sample_environment(chain, rng, 120000);
    for (const auto& piece : enumerate_traps(env)) {
        if (piece.censored) continue;
        CHECK(piece.length >= 1);
        lengths.push_back(piece.length);
    }
    REQUIRE(lengths.size() > 3000);
    // disjoint piece ranges, ordered left to right
    const auto traps = enumerate_traps(env);
    for (std::size_t i = 1; i < traps.size(); ++i)
        CHECK(traps[i].piece_lo() >= traps[i - 1].piece_hi());
    const double n = static_cast<double>(lengths.size());
    std::vector<double> observed(4, 0.0), expected(4, 0.0);
    for (auto l : lengths) ++observed[static_cast<std::size_t>(std::min<std::int64_t>(l, 4) - 1)];
    double tail = n;
    for (int m = 1; m <= 3; ++m) {
        expected[static_cast<std::size_t>(m - 1)] = n * analytic::trap_length_pmf(m, 0.5);
        tail -= expected[static_cast<std::size_t>(m - 1)];
    }
    expected[3] = tail;
    CHECK(stats::chi_square_gof(observed, expected).p_value > 0.001);
}

TEST_CASE("backbone") {
    // trap-free environment: backbone is the cluster itself
    {
        std::vector<std::uint8_t> cols(10, bits(true, true, true));
        const Environment env = make_env(0, cols);
        CHECK(extract_backbone(env).cols == env.cols);
    }
    // single-trap window: exactly the bottom run is deleted
    {
        const Environment env = single_trap_window();
        const Environment bb = extract_backbone(env);
        for (std::int64_t x = -1; x <= 5; ++x) {
            const bool run_edge = x >= 0 && x <= 3;
            CHECK(bb.bottom(x) == (run_edge ? false : env.bottom(x)));
            CHECK(bb.top(x) == env.top(x));
            CHECK(bb.vertical(x) == env.vertical(x));
        }
    }
    // pre-regeneration points survive into the backbone (deleting trap runs
    // can only add isolated (x,1) vertices, so the set can grow)
    {
        const auto chain = build_column_chain(0.5);
        Rng rng(3);
        Environment env = sample_environment(chain, rng, 3000);
        const Environment bb = extract_backbone(env);
        const auto points = find_pre_regeneration_points(bb);
        for (std::int64_t b : env.cycle_boundaries)
            if (b > bb.x_lo && b <= bb.x_hi())
                CHECK(std::binary_search(points.begin(), points.end(), b));
    }
}

TEST_CASE("pruning reproduces the omega vs omega^p comparison exactly") {
    const Environment env = pruning_figure_window();
    // two traps on the bottom rail: (1,0) length 1 and (5,0) length 3
    const auto traps = enumerate_traps(env);
    REQUIRE(traps.size() == 2);
    CHECK(traps[0].x_entrance == 1);
    CHECK(traps[0].rail == 0);
    CHECK(traps[0].length == 1);
    CHECK(traps[1].x_entrance == 5);
    CHECK(traps[1].rail == 0);
    CHECK(traps[1].length == 3);

    const auto pe = prune_environment(env, 1.0);
    // compacted span: surviving levels -1,0,1,3,4,5,9 -> -1..5
    CHECK(pe.base.x_lo == -1);
    CHECK(pe.base.x_hi() == 5);
    CHECK(pe.orig_levels == std::vector<std::int64_t>{-1, 0, 1, 3, 4, 5, 9});
    CHECK(pe.new_of_orig(0) == 0);
    CHECK(pe.new_of_orig(3) == 2);  // the "(3,1) maps to (2,1)" label
    CHECK(pe.orig_of_new(2) == 3);

    // obstacles at compacted levels 1 and 4, on the top rail
    REQUIRE(pe.obstacles.size() == 2);
    CHECK(pe.obstacles[0].x == 1);
    CHECK(pe.obstacles[0].rail == 1);
    CHECK(pe.obstacles[0].trap_length == 1);
    CHECK(pe.obstacles[1].x == 4);
    CHECK(pe.obstacles[1].rail == 1);
    CHECK(pe.obstacles[1].trap_length == 3);

    // exact edge sets of the pruned figure: top horizontals at {-1,0,1,3,4}
    // (1 and 4 are merged edges), bottom at {0,2}, verticals at {0,1,2,3,4};
    // the last level (new 5, original 9) only carries the dotted continuation
    auto expect_top = [](std::int64_t x) {
        return x == -1 || x == 0 || x == 1 || x == 3 || x == 4;
    };
    auto expect_bottom = [](std::int64_t x) { return x == 0 || x == 2; };
    auto expect_vert = [](std::int64_t x) { return x >= 0 && x <= 4; };
    for (std::int64_t x = -1; x <= 4; ++x) {
        CHECK(pe.base.top(x) == expect_top(x));
        CHECK(pe.base.bottom(x) == expect_bottom(x));
        CHECK(pe.base.vertical(x) == expect_vert(x));
    }
    CHECK_FALSE(pe.base.vertical(5));
    CHECK_FALSE(pe.base.bottom(5));

    // merged resistances match the series sum (direct summation oracle)
    const double lambda = 1.0;
    for (const auto& o : pe.obstacles) {
        double series = 0.0;
        for (std::int64_t j = o.orig_x_entrance; j <= o.orig_x_entrance + o.trap_length; ++j)
            series += std::exp(-lambda * (2.0 * static_cast<double>(j) + 1.0));
        CHECK(o.r_series == doctest::Approx(series).epsilon(1e-12));
    }
}

TEST_CASE("pruning invariants on sampled environments") {
    const auto chain = build_column_chain(0.5);
    Rng rng(17);
    const double lambda = 0.6;
    Environment env = sample_environment(chain, rng, 4000);
    const auto pe = prune_environment(env, lambda);
    const auto traps = enumerate_traps(env);
    std::size_t complete = 0;
    for (const auto& t : traps)
        if (!t.censored) ++complete;
    CHECK(pe.obstacles.size() == complete);

    // idempotence: the pruned environment contains no traps
    CHECK(enumerate_traps(pe.base).empty());

    // merged resistances against direct summation
    for (const auto& o : pe.obstacles) {
        double series = 0.0;
        for (std::int64_t j = o.orig_x_entrance; j <= o.orig_x_entrance + o.trap_length; ++j)
            series += std::exp(-lambda * (2.0 * static_cast<double>(j) + 1.0));
        CHECK(o.r_series == doctest::Approx(series).epsilon(1e-10));
    }

    // conductance drops by exactly (1 - e^{-2l}) per obstacle passed
    // (restricted to small x where e^{lambda(2x+1)} stays in double range)
    const double gamma = std::exp(-2.0 * lambda);
    for (const auto& o : pe.obstacles) {
        if (o.x < 1 || o.x > 200) continue;
        const bool left_is_obstacle =
            pe.obstacle_at(o.x - 1, 0) != nullptr || pe.obstacle_at(o.x - 1, 1) != nullptr;
        if (left_is_obstacle) continue;
        const double before = pruned_conductance_horizontal(pe, o.x - 1, lambda) /
                              std::exp(lambda * (2.0 * static_cast<double>(o.x - 1) + 1.0));
        const double after = pruned_conductance_horizontal(pe, o.x, lambda) /
                             std::exp(lambda * (2.0 * static_cast<double>(o.x) + 1.0));
        CHECK(after / before == doctest::Approx(1.0 - gamma).epsilon(1e-12));
    }

    // p(v) bookkeeping: number of obstacles in [0, x)
    std::int64_t count = 0;
    std::size_t oi = 0;
    for (std::int64_t x = 0; x <= pe.base.x_hi(); ++x) {
        while (oi < pe.obstacles.size() && pe.obstacles[oi].x < x) {
            if (pe.obstacles[oi].x >= 0) ++count;
            ++oi;
        }
        CHECK(pe.obstacles_before(x) == count);
    }

    // boundaries survive and stay boundaries of the pruned environment
    const auto pruned_points = find_pre_regeneration_points(pe.base);
    for (std::int64_t b : pe.base.cycle_boundaries) {
        if (b <= pe.base.x_lo || b > pe.base.x_hi()) continue;
        CHECK(std::binary_search(pruned_points.begin(), pruned_points.end(), b));
    }
}

TEST_CASE("pruning requires complete pieces") {
    // censored piece at the right edge
    std::vector<std::uint8_t> cols;
    cols.push_back(bits(true, true, false));
    cols.push_back(bits(true, true, true));   // entrance at 1
    cols.push_back(bits(true, true, false));  // run continues to the window edge
    cols.push_back(bits(true, true, false));
    const Environment env = make_env(0, cols);
    const auto traps = enumerate_traps(env);
    REQUIRE(!traps.empty());
    for (const auto& piece : traps) CHECK(piece.censored);
    CHECK_THROWS_AS(prune_environment(env, 1.0), MarginError);
}

TEST_CASE("trap index classification") {
    const Environment env = single_trap_window();
    TrapIndex index(env);
    REQUIRE(!index.pieces().empty());
    REQUIRE(index.pieces()[0].x_entrance == 0);  // the complete piece sorts first
    CHECK(index.piece_at(0, 0) == -1);           // entrance is backbone
    for (std::int64_t x = 1; x <= 4; ++x) {
        CHECK(index.piece_at(x, 0) == 0);
        CHECK(index.piece_at(x, 1) == -1);
    }
    CHECK(index.piece_at(5, 0) == -1);
}
