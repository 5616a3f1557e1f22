#include "ladderwalk/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ladderwalk::coupling {

namespace {

// Edge bit with everything outside the stored window closed (handcrafted
// walled windows rely on this; sampled runs keep margins by extension).
inline bool bit_at(const Environment& env, std::int64_t x, std::uint8_t bit) {
    if (!env.in_range(x)) return false;
    return env.cols[static_cast<std::size_t>(x - env.x_lo)] & bit;
}

inline std::uint8_t rail_bit(int y) { return y ? kTopBit : kBottomBit; }

inline std::int64_t vertex_key(std::int64_t x, int y) { return (x << 1) | y; }

}  // namespace

// ---------------------------------------------------------------------------
// Origin coin.

OriginCoin estimate_origin_coin(double p, std::int64_t window_half_width,
                                std::int64_t target_conditional_samples, Rng& rng,
                                std::int64_t max_windows) {
    OriginCoin coin;
    std::int64_t heads = 0;
    std::int64_t windows = 0;
    while (coin.n_conditional < target_conditional_samples && windows < max_windows) {
        auto rejection = sample_window_rejection(p, window_half_width, rng, max_windows - windows);
        windows += rejection.attempts;
        const auto traps = enumerate_traps(rejection.env);
        const TrapPiece* t1 = nullptr;
        const TrapPiece* t0 = nullptr;
        for (const auto& piece : traps) {
            if (piece.censored) continue;
            if (piece.x_entrance >= 0) {
                t1 = &piece;
                break;
            }
            t0 = &piece;
        }
        const bool in_t1 = t1 != nullptr && t1->x_entrance == 0;
        const bool in_int_t0 =
            t0 != nullptr && t0->x_entrance < 0 && t0->x_bottom >= 0;
        if (!in_t1 && !in_int_t0) continue;
        ++coin.n_conditional;
        if (in_t1) {
            ++heads;
        } else {
            OriginCoin::TailsDraw draw;
            draw.length = t0->length;
            draw.offset = -t0->x_entrance;  // position of the origin inside the piece
            draw.y = 0;
            coin.tails_draws.push_back(draw);
        }
    }
    if (coin.n_conditional == 0)
        throw BudgetError("estimate_origin_coin: no conditional samples within the window budget");
    coin.prob_heads = static_cast<double>(heads) / static_cast<double>(coin.n_conditional);
    coin.se = std::sqrt(coin.prob_heads * (1.0 - coin.prob_heads) /
                        static_cast<double>(coin.n_conditional));
    return coin;
}

// ---------------------------------------------------------------------------
// CoupledEnvironment.

namespace {

// A cycle whose traps are all shorter than the cap (rejection on cycles).
Cycle sample_cycle_capped(const ColumnChain& chain, Rng& rng, std::int64_t max_trap_length) {
    for (int attempt = 0; attempt < 1000000; ++attempt) {
        Cycle c = sample_cycle(chain, rng);
        if (max_trap_length < 1) return c;
        Environment probe;
        probe.p = chain.p;
        probe.x_lo = 0;
        probe.cols = c.cols;
        probe.cols.push_back(kPatternCol);
        bool ok = true;
        for (const auto& piece : enumerate_traps(probe))
            if (piece.length > max_trap_length) ok = false;
        if (ok) return c;
    }
    throw BudgetError("sample_cycle_capped: no admissible cycle");
}

void append_capped_cycles(Environment& env, const ColumnChain& chain, Rng& rng,
                          std::int64_t target_x_hi, std::int64_t max_trap_length) {
    while (env.x_hi() < target_x_hi) {
        const Cycle c = sample_cycle_capped(chain, rng, max_trap_length);
        const std::int64_t boundary = env.x_hi();
        env.cols.pop_back();
        env.cols.insert(env.cols.end(), c.cols.begin(), c.cols.end());
        env.cols.push_back(kPatternCol);
        env.cycle_boundaries.push_back(boundary + c.length());
    }
}

void prepend_capped_cycles(Environment& env, const ColumnChain& chain, Rng& rng,
                           std::int64_t target_x_lo, std::int64_t max_trap_length) {
    while (env.x_lo > target_x_lo) {
        const Cycle c = sample_cycle_capped(chain, rng, max_trap_length);
        env.cols.insert(env.cols.begin(), c.cols.begin(), c.cols.end());
        env.x_lo -= c.length();
    }
}

}  // namespace

CoupledEnvironment::CoupledEnvironment(const ColumnChain& chain, const CoupledBuildConfig& cfg,
                                       Rng& rng)
    : chain_(&chain), cfg_(cfg), lambda_(cfg.lambda) {
    source_.p = chain.p;
    source_.provenance = Provenance::kCycleStationary;
    source_.x_lo = 0;
    source_.cols.push_back(kPatternCol);
    source_.cycle_boundaries.push_back(0);
    append_capped_cycles(source_, chain, rng, std::max<std::int64_t>(cfg.min_x_hi, 8),
                         cfg.max_trap_length);
    prepend_capped_cycles(source_, chain, rng, -std::max<std::int64_t>(cfg.min_x_hi / 4, 8),
                          cfg.max_trap_length);
    has_source_ = true;
    // Dedicated substream for re-inserted lengths so rebuilds are stable.
    length_rng_state_ = rng.next_u64();
    rebuild_rng_ = Rng(length_rng_state_);
    rebuild();
}

CoupledEnvironment::CoupledEnvironment(const ColumnChain& chain, const CoupledBuildConfig& cfg,
                                       std::int64_t window_half_width, const OriginCoin& coin,
                                       Rng& rng)
    : chain_(nullptr), cfg_(cfg), lambda_(cfg.lambda) {
    (void)chain;  // the window law admits no extension; the chain is not used
    auto rejection = sample_window_rejection(cfg.p, window_half_width, rng);
    source_ = std::move(rejection.env);
    // Trim censored edge pieces so the pruning is well defined.
    for (;;) {
        const auto traps = enumerate_traps(source_);
        auto censored =
            std::find_if(traps.begin(), traps.end(), [](const TrapPiece& t) { return t.censored; });
        if (censored == traps.end()) break;
        source_.cols.resize(static_cast<std::size_t>(censored->x_entrance - source_.x_lo));
    }
    has_source_ = true;

    // The origin coin fires when the pruning would assign the origin obstacle
    // coordinate 0 (the origin lies in T1's entrance column or in int(T0)).
    const auto traps = enumerate_traps(source_);
    const TrapPiece* covering = nullptr;
    bool origin_in_t1 = false;
    for (const auto& piece : traps) {
        if (piece.x_entrance == 0) origin_in_t1 = true;
        if (piece.x_entrance < 0 && piece.x_bottom >= 0) covering = &piece;
    }
    if (origin_in_t1 || covering != nullptr) {
        used_origin_coin_ = true;
        origin_coin_heads_ = rng.uniform() < coin.prob_heads;
        if (!origin_coin_heads_) {
            if (coin.tails_draws.empty())
                throw std::invalid_argument("CoupledEnvironment: origin coin has no tails draws");
            const auto& draw = coin.tails_draws[rng.below(coin.tails_draws.size())];
            origin_tails_length_ = draw.length;
            origin_shift_ = std::min<std::int64_t>(draw.offset, draw.length);
        }
    }
    length_rng_state_ = rng.next_u64();
    rebuild_rng_ = Rng(length_rng_state_);
    rebuild();
}

CoupledEnvironment::CoupledEnvironment(PrunedEnvironment pruned,
                                       std::span<const std::int64_t> lengths)
    : chain_(nullptr), lambda_(pruned.lambda) {
    cfg_.lambda = pruned.lambda;
    cfg_.p = pruned.base.p;
    pruned_ = std::move(pruned);
    if (lengths.size() != pruned_.obstacles.size())
        throw std::invalid_argument("CoupledEnvironment: one length per obstacle required");
    for (std::size_t i = 0; i < lengths.size(); ++i)
        lengths_by_entrance_[pruned_.obstacles[i].orig_x_entrance] = lengths[i];
    build_tilde();
}

std::int64_t CoupledEnvironment::draw_length(Rng& rng) const {
    const double gamma_c = std::exp(-2.0 * analytic::critical_bias(cfg_.p));
    for (;;) {
        const double u = rng.uniform_pos();
        const std::int64_t len =
            1 + static_cast<std::int64_t>(std::floor(std::log(u) / std::log(gamma_c)));
        if (cfg_.max_trap_length < 1 || len <= cfg_.max_trap_length) return len;
    }
}

void CoupledEnvironment::rebuild() {
    pruned_ = prune_environment(source_, lambda_);
    // The window-coin tails branch overrides the origin piece length.
    if (used_origin_coin_ && !origin_coin_heads_) {
        for (auto& o : pruned_.obstacles) {
            if (o.x == 0) {
                lengths_by_entrance_[o.orig_x_entrance] = origin_tails_length_;
                origin_shift_ = std::min(origin_shift_, origin_tails_length_);
                break;
            }
        }
    }
    for (const auto& o : pruned_.obstacles)
        if (!lengths_by_entrance_.count(o.orig_x_entrance))
            lengths_by_entrance_[o.orig_x_entrance] = draw_length(rebuild_rng_);
    build_tilde();
}

void CoupledEnvironment::build_tilde() {
    pieces_.clear();
    tilde_ = Environment{};
    tilde_.p = pruned_.base.p;
    tilde_.provenance = pruned_.base.provenance;
    tilde_of_pruned_.assign(pruned_.base.cols.size(), 0);
    pruned_of_tilde_.clear();
    piece_of_tilde_.clear();

    std::vector<std::uint8_t> cols;
    std::size_t obstacle_idx = 0;
    for (std::size_t i = 0; i < pruned_.base.cols.size(); ++i) {
        const std::int64_t xp = pruned_.base.x_lo + static_cast<std::int64_t>(i);
        tilde_of_pruned_[i] = static_cast<std::int64_t>(cols.size());
        while (obstacle_idx < pruned_.obstacles.size() && pruned_.obstacles[obstacle_idx].x < xp)
            ++obstacle_idx;
        const bool is_obstacle =
            obstacle_idx < pruned_.obstacles.size() && pruned_.obstacles[obstacle_idx].x == xp;
        if (!is_obstacle) {
            cols.push_back(pruned_.base.cols[i]);
            pruned_of_tilde_.push_back(static_cast<std::int64_t>(i));
            piece_of_tilde_.push_back(-1);
            continue;
        }
        const auto& o = pruned_.obstacles[obstacle_idx];
        auto it = lengths_by_entrance_.find(o.orig_x_entrance);
        if (it == lengths_by_entrance_.end())
            throw std::logic_error("build_tilde: missing re-inserted length");
        const std::int64_t L = it->second;
        auto moves = analytic::obstacle_transitions(lambda_, L);
        if (!moves.valid && cfg_.require_valid_cases)
            throw InvalidCouplingParameters(
                "case-(2) vector invalid at lambda=" + std::to_string(lambda_) +
                ", L=" + std::to_string(L));
        Piece piece;
        piece.x0 = static_cast<std::int64_t>(cols.size());  // provisional index; shifted below
        piece.length = L;
        piece.rail_trap = 1 - o.rail;
        piece.obstacle_x_pruned = o.x;
        piece.moves = moves;
        double cdf = 0.0;
        for (int m = 0; m < 7; ++m) {
            cdf += moves.prob[static_cast<std::size_t>(m)];
            piece.cdf[static_cast<std::size_t>(m)] = cdf;
        }
        piece.cdf[6] = 1.0;
        pieces_.push_back(piece);

        const std::uint8_t trap_bit = rail_bit(piece.rail_trap);
        const std::uint8_t back_bit = rail_bit(o.rail);
        // entrance column: vertical open, both horizontals open
        cols.push_back(static_cast<std::uint8_t>(trap_bit | back_bit | kVertBit));
        pruned_of_tilde_.push_back(static_cast<std::int64_t>(i));
        piece_of_tilde_.push_back(-1);
        // interior columns
        for (std::int64_t j = 1; j < L; ++j) {
            cols.push_back(static_cast<std::uint8_t>(trap_bit | back_bit));
            pruned_of_tilde_.push_back(-1);
            piece_of_tilde_.push_back(static_cast<std::int32_t>(pieces_.size()) - 1);
        }
        // bottom column: dead end stops, backbone continues
        cols.push_back(back_bit);
        pruned_of_tilde_.push_back(-1);
        piece_of_tilde_.push_back(static_cast<std::int32_t>(pieces_.size()) - 1);
    }

    tilde_.cols = std::move(cols);
    // Anchor: pruned level 0 maps to tilde level -origin_shift_ (0 normally).
    const std::int64_t ip0 = -pruned_.base.x_lo;  // index of pruned level 0
    std::int64_t anchor_index = 0;
    if (ip0 >= 0 && ip0 < static_cast<std::int64_t>(tilde_of_pruned_.size()))
        anchor_index = tilde_of_pruned_[static_cast<std::size_t>(ip0)];
    tilde_.x_lo = -origin_shift_ - anchor_index;
    for (auto& piece : pieces_) piece.x0 += tilde_.x_lo;

    // Map pre-regeneration boundaries into tilde coordinates.
    for (std::int64_t b : pruned_.base.cycle_boundaries) {
        const std::size_t ib = static_cast<std::size_t>(b - pruned_.base.x_lo);
        tilde_.cycle_boundaries.push_back(tilde_.x_lo + tilde_of_pruned_[ib]);
    }
}

void CoupledEnvironment::extend_right(Rng& rng, std::int64_t target_tilde_x_hi) {
    if (!has_source_ || chain_ == nullptr)
        throw WindowExitError("coupled environment cannot be extended");
    while (tilde_.x_hi() < target_tilde_x_hi) {
        const std::int64_t grow =
            std::max<std::int64_t>(256, (source_.x_hi() - source_.x_lo) / 2);
        append_capped_cycles(source_, *chain_, rng, source_.x_hi() + grow, cfg_.max_trap_length);
        rebuild();
    }
}

void CoupledEnvironment::extend_left(Rng& rng, std::int64_t target_tilde_x_lo) {
    if (!has_source_ || chain_ == nullptr)
        throw WindowExitError("coupled environment cannot be extended");
    while (tilde_.x_lo > target_tilde_x_lo) {
        const std::int64_t grow =
            std::max<std::int64_t>(64, (source_.x_hi() - source_.x_lo) / 4);
        prepend_capped_cycles(source_, *chain_, rng, source_.x_lo - grow, cfg_.max_trap_length);
        rebuild();
    }
}

std::int64_t CoupledEnvironment::tilde_of_pruned(std::int64_t xp) const {
    const std::size_t i = static_cast<std::size_t>(xp - pruned_.base.x_lo);
    return tilde_.x_lo + tilde_of_pruned_[i];
}

std::int64_t CoupledEnvironment::pruned_of_tilde(std::int64_t xt) const {
    const std::size_t i = static_cast<std::size_t>(xt - tilde_.x_lo);
    const std::int64_t idx = pruned_of_tilde_[i];
    return idx < 0 ? std::int64_t{-1} : pruned_.base.x_lo + idx;
}

const CoupledEnvironment::Piece* CoupledEnvironment::piece_containing_tilde(std::int64_t xt) const {
    for (const auto& piece : pieces_)
        if (xt >= piece.x0 && xt <= piece.x0 + piece.length + 1) return &piece;
    return nullptr;
}

bool CoupledEnvironment::tilde_interior(std::int64_t xt) const {
    if (!tilde_.in_range(xt)) return false;
    return piece_of_tilde_[static_cast<std::size_t>(xt - tilde_.x_lo)] >= 0;
}

// ---------------------------------------------------------------------------
// Classification and stepping.

Case classify(const CoupledEnvironment& cenv, const CouplingState& s) {
    if (cenv.tilde_interior(s.v.x)) {
        const std::size_t i = static_cast<std::size_t>(s.v.x - cenv.tilde().x_lo);
        const auto& piece = cenv.pieces()[static_cast<std::size_t>(
            cenv.piece_index_of_tilde(i))];
        return s.v.y == piece.rail_trap ? Case::k4 : Case::k3;
    }
    const std::int64_t xp = cenv.pruned_of_tilde(s.v.x);
    if (xp == s.u.x && s.u.y == s.v.y) {
        return cenv.pruned().obstacle_at(s.u.x, s.u.y) != nullptr ? Case::k2 : Case::k1;
    }
    return Case::k5;
}

namespace {

struct Thresholds {
    double right, left;  // cumulative candidate thresholds; rest is vertical
};

inline Thresholds standard_thresholds(double lambda) {
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double norm = el + 1.0 + eml;
    return {el / norm, (el + eml) / norm};
}

inline Thresholds obstacle_thresholds(double lambda) {
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    // right ~ e^l (1 - e^{-2l}), left ~ e^{-l}, vertical ~ 1; normalizer e^l + 1
    const double norm = el + 1.0;
    return {(el - eml) / norm, (el - eml + eml) / norm};
}

}  // namespace

PrunedCandidates pruned_candidates(const PrunedEnvironment& pe, Vertex u, double lambda) {
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    PrunedCandidates c;
    if (pe.obstacle_at(u.x, u.y) != nullptr) {
        const double norm = el + 1.0;
        c.right = (el - eml) / norm;
        c.left = eml / norm;
        c.vertical = 1.0 / norm;
    } else {
        const double norm = el + 1.0 + eml;
        c.right = el / norm;
        c.left = eml / norm;
        c.vertical = 1.0 / norm;
    }
    return c;
}

CouplingState coupled_step(const CoupledEnvironment& cenv, const CouplingState& s, Rng& rng) {
    const Environment& tilde = cenv.tilde();
    const Environment& pbase = cenv.pruned().base;
    const double lambda = cenv.lambda();
    const double u01 = rng.uniform();
    CouplingState n = s;

    const Case c = classify(cenv, s);
    switch (c) {
        case Case::k1: {
            const Thresholds t = standard_thresholds(lambda);
            n.w = 0;
            if (u01 < t.right) {
                if (bit_at(pbase, s.u.x, rail_bit(s.u.y))) ++n.u.x;
                if (bit_at(tilde, s.v.x, rail_bit(s.v.y))) ++n.v.x;
            } else if (u01 < t.left) {
                if (bit_at(pbase, s.u.x - 1, rail_bit(s.u.y))) --n.u.x;
                if (bit_at(tilde, s.v.x - 1, rail_bit(s.v.y))) --n.v.x;
            } else {
                if (bit_at(pbase, s.u.x, kVertBit)) n.u.y = 1 - n.u.y;
                if (bit_at(tilde, s.v.x, kVertBit)) n.v.y = 1 - n.v.y;
            }
            return n;
        }
        case Case::k2: {
            const auto* obstacle = cenv.pruned().obstacle_at(s.u.x, s.u.y);
            const CoupledEnvironment::Piece* piece = nullptr;
            for (const auto& p : cenv.pieces())
                if (p.obstacle_x_pruned == s.u.x) piece = &p;
            if (obstacle == nullptr || piece == nullptr)
                throw InconsistentStateError("case 2 without an obstacle underfoot");
            if (!piece->moves.valid)
                throw InvalidCouplingParameters("stepping case 2 with an invalid vector (L=" +
                                                std::to_string(piece->length) + ")");
            int move = 6;
            for (int m = 0; m < 7; ++m)
                if (u01 < piece->cdf[static_cast<std::size_t>(m)]) {
                    move = m;
                    break;
                }
            const std::uint8_t ub = rail_bit(s.u.y);
            switch (static_cast<analytic::ObstacleMove>(move)) {
                case analytic::kBothRightExitRight:
                    ++n.u.x;  // merged edge, open by construction
                    ++n.v.x;
                    n.w = 1;
                    break;
                case analytic::kBothLeft:
                    if (bit_at(pbase, s.u.x - 1, ub)) --n.u.x;
                    if (bit_at(tilde, s.v.x - 1, ub)) --n.v.x;
                    n.w = 0;
                    break;
                case analytic::kBothVertical:
                    n.u.y = 1 - n.u.y;  // obstacle vertical is open by construction
                    n.v.y = 1 - n.v.y;
                    n.w = 0;
                    break;
                case analytic::kLeftRightExitRight:
                    if (bit_at(pbase, s.u.x - 1, ub)) --n.u.x;
                    ++n.v.x;
                    n.w = 1;
                    break;
                case analytic::kLeftRightExitLeft:
                    if (bit_at(pbase, s.u.x - 1, ub)) --n.u.x;
                    ++n.v.x;
                    n.w = -1;
                    break;
                case analytic::kVertRightExitRight:
                    n.u.y = 1 - n.u.y;
                    ++n.v.x;
                    n.w = 1;
                    break;
                case analytic::kVertRightExitLeft:
                    n.u.y = 1 - n.u.y;
                    ++n.v.x;
                    n.w = -1;
                    break;
            }
            return n;
        }
        case Case::k3: {
            const std::size_t i = static_cast<std::size_t>(s.v.x - tilde.x_lo);
            const auto& piece =
                cenv.pieces()[static_cast<std::size_t>(cenv.piece_index_of_tilde(i))];
            const std::int64_t L = piece.length;
            const std::int64_t xv = s.v.x - piece.x0;  // 1..L
            const double el = std::exp(lambda), eml = std::exp(-lambda);
            const double norm = el + 1.0 + eml;
            const double gamma = std::exp(-2.0 * lambda);
            double p_right, p_left;
            if (s.w == 0) {
                p_right = el / norm;
                p_left = eml / norm;
            } else if (s.w == -1) {
                // conditioned on exiting left: h(y) ~ gamma^y - gamma^{L+1}
                const double k = static_cast<double>(L + 1);
                const double num_up = 1.0 - std::pow(gamma, k - static_cast<double>(xv) - 1.0);
                const double num_dn = 1.0 - std::pow(gamma, k - static_cast<double>(xv) + 1.0);
                const double den = 1.0 - std::pow(gamma, k - static_cast<double>(xv));
                p_right = el / norm * gamma * num_up / den;
                p_left = eml / norm * (1.0 / gamma) * num_dn / den;
            } else {
                // conditioned on exiting right: h(y) ~ 1 - gamma^y
                const double num_up = 1.0 - std::pow(gamma, static_cast<double>(xv) + 1.0);
                const double num_dn = 1.0 - std::pow(gamma, static_cast<double>(xv) - 1.0);
                const double den = 1.0 - std::pow(gamma, static_cast<double>(xv));
                p_right = el / norm * num_up / den;
                p_left = eml / norm * num_dn / den;
            }
            if (u01 < p_right) ++n.v.x;
            else if (u01 < p_right + p_left) --n.v.x;
            // otherwise the vertical candidate is closed inside the piece: stay
            return n;
        }
        case Case::k4: {
            const Thresholds t = standard_thresholds(lambda);
            n.w = 0;
            if (u01 < t.right) {
                if (bit_at(tilde, s.v.x, rail_bit(s.v.y))) ++n.v.x;
            } else if (u01 < t.left) {
                if (bit_at(tilde, s.v.x - 1, rail_bit(s.v.y))) --n.v.x;
            } else {
                if (bit_at(tilde, s.v.x, kVertBit)) n.v.y = 1 - n.v.y;
            }
            return n;
        }
        case Case::k5: {
            const PrunedCandidates pc = pruned_candidates(cenv.pruned(), s.u, lambda);
            n.w = 0;
            if (u01 < pc.right) {
                if (bit_at(pbase, s.u.x, rail_bit(s.u.y))) ++n.u.x;
            } else if (u01 < pc.right + pc.left) {
                if (bit_at(pbase, s.u.x - 1, rail_bit(s.u.y))) --n.u.x;
            } else {
                if (bit_at(pbase, s.u.x, kVertBit)) n.u.y = 1 - n.u.y;
            }
            return n;
        }
    }
    throw InconsistentStateError("unreachable case");
}

// ---------------------------------------------------------------------------
// Runs and audits.

CoupledRunResult run_coupled(CoupledEnvironment& cenv, Rng& rng, std::int64_t horizon,
                             bool keep_tracks) {
    CoupledRunResult out;
    CouplingState s;
    for (std::int64_t nstep = 0; nstep < horizon; ++nstep) {
        // Keep both components clear of their window edges.
        while (s.v.x + 2 > cenv.tilde().x_hi() || s.u.x + 2 > cenv.pruned().base.x_hi())
            cenv.extend_right(rng, cenv.tilde().x_hi() + 256);
        while (s.v.x - 1 < cenv.tilde().x_lo || s.u.x - 1 < cenv.pruned().base.x_lo)
            cenv.extend_left(rng, cenv.tilde().x_lo - 64);
        const Case c = classify(cenv, s);
        ++out.case_counts[static_cast<std::size_t>(c)];
        const bool v_interior = c == Case::k3 || c == Case::k4;
        if (!v_interior) {
            ++out.pruned_visits[vertex_key(s.u.x, s.u.y)];
            if (keep_tracks) out.pruned_marginal_x.push_back(s.u.x);
        }
        if (c != Case::k5) {
            ++out.full_visits[vertex_key(s.v.x, s.v.y)];
            if (keep_tracks) out.full_marginal_x.push_back(s.v.x);
        }
        s = coupled_step(cenv, s, rng);
        ++out.steps;
    }
    out.final_state = s;
    return out;
}

DominationReport check_visit_domination(const CoupledEnvironment& cenv,
                                        const CoupledRunResult& run) {
    DominationReport report;
    for (const auto& [key, full_count] : run.full_visits) {
        const std::int64_t x = key >> 1;
        const int y = static_cast<int>(key & 1);
        if (cenv.tilde_interior(x)) continue;
        const std::int64_t xp = cenv.pruned_of_tilde(x);
        ++report.checked_vertices;
        const auto it = run.pruned_visits.find(vertex_key(xp, y));
        const std::int64_t pruned_count = it == run.pruned_visits.end() ? 0 : it->second;
        if (full_count > pruned_count) {
            ++report.violations;
            if (report.examples.size() < 16)
                report.examples.push_back({x, y, full_count, pruned_count});
        }
    }
    return report;
}

PrunedWalkResult run_pruned_walk(CoupledEnvironment& cenv, Rng& rng, const StopSpec& stop) {
    PrunedWalkResult out;
    const double lambda = cenv.lambda();
    Vertex u{0, 0};
    std::int64_t time = 0;
    auto flagged = [&](std::int64_t x) {
        const auto& bs = cenv.pruned().base.cycle_boundaries;
        return std::binary_search(bs.begin(), bs.end(), x);
    };
    if (u.y == 0 && flagged(u.x)) out.boundary_hits.push_back({u.x, 0});
    for (;;) {
        if (stop.horizon >= 0 && time >= stop.horizon) {
            out.reason = StopReason::kHorizon;
            break;
        }
        if (stop.x_threshold && u.x >= *stop.x_threshold) {
            out.reason = StopReason::kXThreshold;
            break;
        }
        if (stop.on_return_to_origin && time >= 1 && u == Vertex{0, 0}) {
            out.reason = StopReason::kReturnToOrigin;
            break;
        }
        while (u.x + 2 > cenv.pruned().base.x_hi())
            cenv.extend_right(rng, cenv.tilde().x_hi() + 256);
        while (u.x - 1 < cenv.pruned().base.x_lo)
            cenv.extend_left(rng, cenv.tilde().x_lo - 64);
        const PrunedCandidates pc = pruned_candidates(cenv.pruned(), u, lambda);
        const double u01 = rng.uniform();
        const Environment& pbase = cenv.pruned().base;
        if (u01 < pc.right) {
            if (bit_at(pbase, u.x, rail_bit(u.y))) ++u.x;
        } else if (u01 < pc.right + pc.left) {
            if (bit_at(pbase, u.x - 1, rail_bit(u.y))) --u.x;
        } else {
            if (bit_at(pbase, u.x, kVertBit)) u.y = 1 - u.y;
        }
        ++time;
        out.min_x = std::min(out.min_x, u.x);
        out.max_x = std::max(out.max_x, u.x);
        if (u.y == 0 && flagged(u.x)) out.boundary_hits.push_back({u.x, time});
    }
    out.position = u;
    out.time = time;
    return out;
}

// ---------------------------------------------------------------------------
// Exact finite-window oracles.

namespace {

struct CoupledKernel {
    const CoupledEnvironment* cenv;
    std::int64_t np, nt;  // level counts
    std::size_t n_states;

    std::size_t id(const CouplingState& s) const {
        const std::size_t iu = static_cast<std::size_t>(
            2 * (s.u.x - cenv->pruned().base.x_lo) + s.u.y);
        const std::size_t iv =
            static_cast<std::size_t>(2 * (s.v.x - cenv->tilde().x_lo) + s.v.y);
        return (iu * static_cast<std::size_t>(2 * nt) + iv) * 3 +
               static_cast<std::size_t>(s.w + 1);
    }
    CouplingState state_of(std::size_t id) const {
        CouplingState s;
        s.w = static_cast<int>(id % 3) - 1;
        id /= 3;
        const std::size_t iv = id % static_cast<std::size_t>(2 * nt);
        const std::size_t iu = id / static_cast<std::size_t>(2 * nt);
        s.v = {cenv->tilde().x_lo + static_cast<std::int64_t>(iv / 2), static_cast<int>(iv % 2)};
        s.u = {cenv->pruned().base.x_lo + static_cast<std::int64_t>(iu / 2),
               static_cast<int>(iu % 2)};
        return s;
    }
};

// Deterministic outcome of one candidate for each chain component.
void add_transitions(const CoupledEnvironment& cenv, const CouplingState& s,
                     std::vector<std::pair<std::size_t, double>>& row, const CoupledKernel& K) {
    const Environment& tilde = cenv.tilde();
    const Environment& pbase = cenv.pruned().base;
    const double lambda = cenv.lambda();
    const Case c = classify(cenv, s);
    auto push = [&](CouplingState ns, double prob) {
        if (prob > 0.0) row.emplace_back(K.id(ns), prob);
    };
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double norm = el + 1.0 + eml;
    switch (c) {
        case Case::k1: {
            CouplingState r = s, l = s, v = s;
            r.w = l.w = v.w = 0;
            if (bit_at(pbase, s.u.x, rail_bit(s.u.y))) ++r.u.x;
            if (bit_at(tilde, s.v.x, rail_bit(s.v.y))) ++r.v.x;
            if (bit_at(pbase, s.u.x - 1, rail_bit(s.u.y))) --l.u.x;
            if (bit_at(tilde, s.v.x - 1, rail_bit(s.v.y))) --l.v.x;
            if (bit_at(pbase, s.u.x, kVertBit)) v.u.y = 1 - v.u.y;
            if (bit_at(tilde, s.v.x, kVertBit)) v.v.y = 1 - v.v.y;
            push(r, el / norm);
            push(l, eml / norm);
            push(v, 1.0 / norm);
            return;
        }
        case Case::k2: {
            const CoupledEnvironment::Piece* piece = nullptr;
            for (const auto& p : cenv.pieces())
                if (p.obstacle_x_pruned == s.u.x) piece = &p;
            if (piece == nullptr) throw InconsistentStateError("kernel: case 2 without piece");
            const std::uint8_t ub = rail_bit(s.u.y);
            for (int m = 0; m < 7; ++m) {
                const double prob = piece->moves.prob[static_cast<std::size_t>(m)];
                if (prob <= 0.0) continue;
                CouplingState ns = s;
                switch (static_cast<analytic::ObstacleMove>(m)) {
                    case analytic::kBothRightExitRight:
                        ++ns.u.x;
                        ++ns.v.x;
                        ns.w = 1;
                        break;
                    case analytic::kBothLeft:
                        if (bit_at(pbase, s.u.x - 1, ub)) --ns.u.x;
                        if (bit_at(tilde, s.v.x - 1, ub)) --ns.v.x;
                        ns.w = 0;
                        break;
                    case analytic::kBothVertical:
                        ns.u.y = 1 - ns.u.y;
                        ns.v.y = 1 - ns.v.y;
                        ns.w = 0;
                        break;
                    case analytic::kLeftRightExitRight:
                        if (bit_at(pbase, s.u.x - 1, ub)) --ns.u.x;
                        ++ns.v.x;
                        ns.w = 1;
                        break;
                    case analytic::kLeftRightExitLeft:
                        if (bit_at(pbase, s.u.x - 1, ub)) --ns.u.x;
                        ++ns.v.x;
                        ns.w = -1;
                        break;
                    case analytic::kVertRightExitRight:
                        ns.u.y = 1 - ns.u.y;
                        ++ns.v.x;
                        ns.w = 1;
                        break;
                    case analytic::kVertRightExitLeft:
                        ns.u.y = 1 - ns.u.y;
                        ++ns.v.x;
                        ns.w = -1;
                        break;
                }
                push(ns, prob);
            }
            return;
        }
        case Case::k3: {
            const std::size_t i = static_cast<std::size_t>(s.v.x - tilde.x_lo);
            const auto& piece =
                cenv.pieces()[static_cast<std::size_t>(cenv.piece_index_of_tilde(i))];
            const std::int64_t L = piece.length;
            const std::int64_t xv = s.v.x - piece.x0;
            const double gamma = std::exp(-2.0 * lambda);
            double p_right, p_left;
            if (s.w == 0) {
                p_right = el / norm;
                p_left = eml / norm;
            } else if (s.w == -1) {
                const double k = static_cast<double>(L + 1);
                const double num_up = 1.0 - std::pow(gamma, k - static_cast<double>(xv) - 1.0);
                const double num_dn = 1.0 - std::pow(gamma, k - static_cast<double>(xv) + 1.0);
                const double den = 1.0 - std::pow(gamma, k - static_cast<double>(xv));
                p_right = el / norm * gamma * num_up / den;
                p_left = eml / norm * (1.0 / gamma) * num_dn / den;
            } else {
                const double num_up = 1.0 - std::pow(gamma, static_cast<double>(xv) + 1.0);
                const double num_dn = 1.0 - std::pow(gamma, static_cast<double>(xv) - 1.0);
                const double den = 1.0 - std::pow(gamma, static_cast<double>(xv));
                p_right = el / norm * num_up / den;
                p_left = eml / norm * num_dn / den;
            }
            CouplingState r = s, l = s, st = s;
            ++r.v.x;
            --l.v.x;
            push(r, p_right);
            push(l, p_left);
            push(st, 1.0 - p_right - p_left);
            return;
        }
        case Case::k4: {
            CouplingState r = s, l = s, v = s;
            r.w = l.w = v.w = 0;
            if (bit_at(tilde, s.v.x, rail_bit(s.v.y))) ++r.v.x;
            if (bit_at(tilde, s.v.x - 1, rail_bit(s.v.y))) --l.v.x;
            if (bit_at(tilde, s.v.x, kVertBit)) v.v.y = 1 - v.v.y;
            push(r, el / norm);
            push(l, eml / norm);
            push(v, 1.0 / norm);
            return;
        }
        case Case::k5: {
            const PrunedCandidates pc = pruned_candidates(cenv.pruned(), s.u, lambda);
            CouplingState r = s, l = s, v = s;
            r.w = l.w = v.w = 0;
            if (bit_at(pbase, s.u.x, rail_bit(s.u.y))) ++r.u.x;
            if (bit_at(pbase, s.u.x - 1, rail_bit(s.u.y))) --l.u.x;
            if (bit_at(pbase, s.u.x, kVertBit)) v.u.y = 1 - v.u.y;
            push(r, pc.right);
            push(l, pc.left);
            push(v, pc.vertical);
            return;
        }
    }
}

}  // namespace

std::vector<double> exact_coupled_marginal(const CoupledEnvironment& cenv, int k,
                                           bool full_component, double tail_eps) {
    CoupledKernel K;
    K.cenv = &cenv;
    K.np = static_cast<std::int64_t>(cenv.pruned().base.cols.size());
    K.nt = static_cast<std::int64_t>(cenv.tilde().cols.size());
    K.n_states = static_cast<std::size_t>(2 * K.np) * static_cast<std::size_t>(2 * K.nt) * 3;

    // Rows built lazily.
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(K.n_states);
    std::vector<bool> built(K.n_states, false);
    auto row_of = [&](std::size_t id) -> const std::vector<std::pair<std::size_t, double>>& {
        if (!built[id]) {
            add_transitions(cenv, K.state_of(id), rows[id], K);
            built[id] = true;
        }
        return rows[id];
    };
    auto watched = [&](std::size_t id) {
        const CouplingState s = K.state_of(id);
        const Case c = classify(cenv, s);
        if (full_component) return c != Case::k5;            // u == v or v interior
        return !(c == Case::k3 || c == Case::k4);            // v corresponds
    };

    std::vector<double> cur(K.n_states, 0.0), nxt(K.n_states, 0.0), pend(K.n_states, 0.0);
    const CouplingState start{{0, 0}, {0, 0}, 0};
    cur[K.id(start)] = 1.0;

    for (int step = 0; step < k; ++step) {
        std::fill(nxt.begin(), nxt.end(), 0.0);
        std::fill(pend.begin(), pend.end(), 0.0);
        double pending_mass = 0.0;
        auto propagate = [&](std::vector<double>& from, bool source_is_watched) {
            (void)source_is_watched;
            for (std::size_t id = 0; id < K.n_states; ++id) {
                const double mass = from[id];
                if (mass == 0.0) continue;
                for (const auto& [to, prob] : row_of(id)) {
                    if (watched(to)) {
                        nxt[to] += mass * prob;
                    } else {
                        pend[to] += mass * prob;
                        pending_mass += mass * prob;
                    }
                }
            }
        };
        propagate(cur, true);
        std::vector<double> hold(K.n_states, 0.0);
        int guard = 0;
        while (pending_mass > tail_eps) {
            if (++guard > 500000)
                throw std::runtime_error("exact_coupled_marginal: excursion mass not absorbed");
            hold.swap(pend);
            std::fill(pend.begin(), pend.end(), 0.0);
            pending_mass = 0.0;
            propagate(hold, false);
        }
        cur.swap(nxt);
    }

    if (full_component) {
        std::vector<double> dist(static_cast<std::size_t>(2 * K.nt), 0.0);
        for (std::size_t id = 0; id < K.n_states; ++id) {
            if (cur[id] == 0.0) continue;
            const CouplingState s = K.state_of(id);
            dist[static_cast<std::size_t>(2 * (s.v.x - cenv.tilde().x_lo) + s.v.y)] += cur[id];
        }
        return dist;
    }
    std::vector<double> dist(static_cast<std::size_t>(2 * K.np), 0.0);
    for (std::size_t id = 0; id < K.n_states; ++id) {
        if (cur[id] == 0.0) continue;
        const CouplingState s = K.state_of(id);
        dist[static_cast<std::size_t>(2 * (s.u.x - cenv.pruned().base.x_lo) + s.u.y)] += cur[id];
    }
    return dist;
}

KStepDistribution pruned_exact_k_step(const PrunedEnvironment& pe, double lambda, Vertex start,
                                      int k, double exit_tol) {
    const Environment& env = pe.base;
    const std::size_t n = env.cols.size();
    KStepDistribution dist;
    dist.x_lo = env.x_lo;
    dist.prob.assign(2 * n, 0.0);
    dist.prob[static_cast<std::size_t>(2 * (start.x - env.x_lo) + start.y)] = 1.0;
    std::vector<double> next(2 * n);
    for (int step = 0; step < k; ++step) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (int y = 0; y < 2; ++y) {
                const double mass = dist.prob[2 * i + y];
                if (mass == 0.0) continue;
                const std::int64_t x = env.x_lo + static_cast<std::int64_t>(i);
                const PrunedCandidates pc = pruned_candidates(pe, {x, y}, lambda);
                double stay = 0.0;
                if (bit_at(env, x, rail_bit(y))) {
                    if (i + 1 < n) next[2 * (i + 1) + y] += mass * pc.right;
                    else dist.exit_mass += mass * pc.right;
                } else {
                    stay += pc.right;
                }
                if (i > 0) {
                    if (bit_at(env, x - 1, rail_bit(y))) next[2 * (i - 1) + y] += mass * pc.left;
                    else stay += pc.left;
                } else {
                    dist.exit_mass += mass * pc.left;
                }
                if (bit_at(env, x, kVertBit)) next[2 * i + (1 - y)] += mass * pc.vertical;
                else stay += pc.vertical;
                next[2 * i + y] += mass * stay;
            }
        }
        dist.prob.swap(next);
    }
    if (dist.exit_mass > exit_tol)
        throw WindowExitError("pruned_exact_k_step: exit mass above tolerance");
    return dist;
}

}  // namespace ladderwalk::coupling
