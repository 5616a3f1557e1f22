#include "ladderwalk/traps.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ladderwalk {

std::vector<TrapPiece> enumerate_traps(const Environment& env) {
    const std::size_t n = env.cols.size();
    std::vector<TrapPiece> out;
    if (n == 0) return out;

    // run[rail][i]: consecutive open horizontals on `rail` starting at index i.
    // vclosed[i]: consecutive closed verticals starting at index i.
    std::vector<std::int64_t> run[2], vclosed(n + 1, 0);
    for (int rail = 0; rail < 2; ++rail) run[rail].assign(n + 1, 0);
    for (std::size_t i = n; i-- > 0;) {
        const std::uint8_t c = env.cols[i];
        run[0][i] = (c & kBottomBit) ? run[0][i + 1] + 1 : 0;
        run[1][i] = (c & kTopBit) ? run[1][i + 1] + 1 : 0;
        vclosed[i] = (c & kVertBit) ? 0 : vclosed[i + 1] + 1;
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!(env.cols[i] & kVertBit)) continue;  // entrance vertical must be open
        for (int rail = 0; rail < 2; ++rail) {
            const std::int64_t m = run[rail][i];
            if (m < 1) continue;
            const int opp = 1 - rail;
            if (run[opp][i] < m) continue;  // parallel run open
            // Interior verticals sit at indices i+1 .. i+m; when the run ends
            // at the window edge (i+m == n) the last one is unverifiable and
            // the piece is censored.
            const bool end_inside = i + static_cast<std::size_t>(m) < n;
            if (vclosed[i + 1] < (end_inside ? m : m - 1)) continue;
            TrapPiece piece;
            piece.x_entrance = env.x_lo + static_cast<std::int64_t>(i);
            piece.rail = rail;
            piece.length = m;
            piece.x_bottom = piece.x_entrance + m;
            piece.censored = !end_inside;  // closure edge and last vertical unverifiable
            out.push_back(piece);
        }
    }
    std::sort(out.begin(), out.end(), [](const TrapPiece& a, const TrapPiece& b) {
        return a.x_entrance < b.x_entrance;
    });
    return out;
}

Environment extract_backbone(const Environment& env) {
    Environment backbone = env;
    for (const TrapPiece& piece : enumerate_traps(env)) {
        if (piece.censored) continue;
        const std::uint8_t bit = piece.rail ? kTopBit : kBottomBit;
        for (std::int64_t x = piece.x_entrance; x < piece.x_bottom; ++x)
            backbone.cols[static_cast<std::size_t>(x - env.x_lo)] &= static_cast<std::uint8_t>(~bit);
    }
    return backbone;
}

void TrapIndex::rebuild(const Environment& env) {
    x_lo_ = env.x_lo;
    code_.assign(env.cols.size(), 0);
    pieces_ = enumerate_traps(env);
    for (std::size_t k = 0; k < pieces_.size(); ++k) index_piece(k);
}

void TrapIndex::extend_right(const Environment& env, std::int64_t from_x) {
    code_.resize(env.cols.size(), 0);
    Environment slice;
    slice.p = env.p;
    slice.provenance = env.provenance;
    slice.x_lo = std::max(env.x_lo, from_x);
    slice.cols.assign(env.cols.begin() + static_cast<std::ptrdiff_t>(slice.x_lo - env.x_lo),
                      env.cols.end());
    for (TrapPiece piece : enumerate_traps(slice)) {
        if (piece.x_entrance <= slice.x_lo) continue;  // belongs to the already-indexed part
        pieces_.push_back(piece);
        index_piece(pieces_.size() - 1);
    }
}

void TrapIndex::index_piece(std::size_t piece_idx) {
    const TrapPiece& piece = pieces_[piece_idx];
    const std::uint32_t code =
        ((static_cast<std::uint32_t>(piece_idx) + 1u) << 1) | static_cast<std::uint32_t>(piece.rail);
    for (std::int64_t x = piece.x_entrance + 1; x <= piece.x_bottom; ++x)
        code_[static_cast<std::size_t>(x - x_lo_)] = code;
}

std::int64_t PrunedEnvironment::obstacles_before(std::int64_t x) const {
    if (x <= 0) return 0;
    auto cmp = [](const Obstacle& o, std::int64_t v) { return o.x < v; };
    const auto lo = std::lower_bound(obstacles.begin(), obstacles.end(), std::int64_t{0}, cmp);
    const auto hi = std::lower_bound(obstacles.begin(), obstacles.end(), x, cmp);
    return hi - lo;
}

const PrunedEnvironment::Obstacle* PrunedEnvironment::obstacle_at(std::int64_t x, int rail) const {
    auto it = std::lower_bound(obstacles.begin(), obstacles.end(), x,
                               [](const Obstacle& o, std::int64_t v) { return o.x < v; });
    if (it != obstacles.end() && it->x == x && it->rail == rail) return &*it;
    return nullptr;
}

std::int64_t PrunedEnvironment::orig_of_new(std::int64_t x_new) const {
    return orig_levels[static_cast<std::size_t>(x_new - base.x_lo)];
}

std::int64_t PrunedEnvironment::new_of_orig(std::int64_t x_orig) const {
    auto it = std::lower_bound(orig_levels.begin(), orig_levels.end(), x_orig);
    if (it == orig_levels.end() || *it != x_orig) return -1;
    return base.x_lo + static_cast<std::int64_t>(it - orig_levels.begin());
}

PrunedEnvironment prune_environment(const Environment& env, double lambda) {
    if (!(lambda > 0.0)) throw std::domain_error("prune_environment: lambda must be positive");
    const auto pieces = enumerate_traps(env);
    for (const auto& piece : pieces)
        if (piece.censored)
            throw MarginError("prune_environment: censored trap piece at x=" +
                              std::to_string(piece.x_entrance));

    PrunedEnvironment pe;
    pe.lambda = lambda;
    pe.base.p = env.p;
    pe.base.provenance = env.provenance;

    const double gamma = std::exp(-2.0 * lambda);
    std::vector<std::uint8_t> cols;
    std::vector<std::int64_t> orig;
    std::size_t next_piece = 0;
    for (std::int64_t x = env.x_lo; x <= env.x_hi(); ++x) {
        while (next_piece < pieces.size() && pieces[next_piece].piece_hi() <= x) ++next_piece;
        const bool interior = next_piece < pieces.size() && x > pieces[next_piece].x_entrance &&
                              x < pieces[next_piece].piece_hi();
        if (interior) continue;  // deleted level
        std::uint8_t bits = env.col(x);
        if (next_piece < pieces.size() && x == pieces[next_piece].x_entrance) {
            const TrapPiece& piece = pieces[next_piece];
            const std::uint8_t trap_bit = piece.rail ? kTopBit : kBottomBit;
            const std::uint8_t obstacle_bit = piece.rail ? kBottomBit : kTopBit;
            bits = static_cast<std::uint8_t>((bits | obstacle_bit | kVertBit) & ~trap_bit);
        }
        cols.push_back(bits);
        orig.push_back(x);
    }

    // Anchor the compacted coordinates: original level 0 keeps coordinate 0 if
    // it survives; otherwise the obstacle of the piece covering 0 receives 0.
    if (env.x_lo <= 0 && env.x_hi() >= 0) {
        std::int64_t anchor_orig = 0;
        for (const auto& piece : pieces) {
            if (piece.x_entrance < 0 && piece.x_bottom >= 0) {
                anchor_orig = piece.x_entrance;  // 0 was deleted; its obstacle gets coordinate 0
                break;
            }
        }
        const auto anchor_it = std::lower_bound(orig.begin(), orig.end(), anchor_orig);
        pe.base.x_lo = -static_cast<std::int64_t>(anchor_it - orig.begin());
    } else {
        pe.base.x_lo = env.x_lo;  // window does not contain 0: keep the left edge coordinate
    }
    pe.base.cols = std::move(cols);
    pe.orig_levels = std::move(orig);

    for (std::size_t k = 0; k < pieces.size(); ++k) {
        const TrapPiece& piece = pieces[k];
        PrunedEnvironment::Obstacle o;
        o.rail = 1 - piece.rail;
        o.trap_length = piece.length;
        o.orig_x_entrance = piece.x_entrance;
        o.x = pe.new_of_orig(piece.x_entrance);
        const double k0 = static_cast<double>(piece.x_entrance);
        o.r_series = std::exp(-lambda * (2.0 * k0 + 1.0)) *
                     (1.0 - std::exp(-2.0 * lambda * static_cast<double>(piece.length + 1))) /
                     (1.0 - gamma);
        pe.obstacles.push_back(o);
    }

    // Pre-regeneration boundaries survive pruning; map them through.
    for (std::int64_t b : env.cycle_boundaries) {
        const std::int64_t nb = pe.new_of_orig(b);
        if (nb != -1) pe.base.cycle_boundaries.push_back(nb);
    }
    return pe;
}

double pruned_conductance_horizontal(const PrunedEnvironment& pe, std::int64_t x, double lambda) {
    const double gamma = std::exp(-2.0 * lambda);
    const double factor = std::pow(1.0 - gamma, static_cast<double>(pe.obstacles_before(x + 1)));
    return std::exp(lambda * (2.0 * static_cast<double>(x) + 1.0)) * factor;
}

double pruned_conductance_vertical(const PrunedEnvironment& pe, std::int64_t x, double lambda) {
    const double gamma = std::exp(-2.0 * lambda);
    const double factor = std::pow(1.0 - gamma, static_cast<double>(pe.obstacles_before(x)));
    return std::exp(lambda * 2.0 * static_cast<double>(x)) * factor;
}

}  // namespace ladderwalk
