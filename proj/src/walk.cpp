#include "ladderwalk/walk.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ladderwalk {

TransitionProbs quenched_transition(const Environment& env, double lambda, Vertex v) {
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double norm = el + 1.0 + eml;
    const std::uint8_t here = env.col(v.x);
    const std::uint8_t before = env.col(v.x - 1);  // margin error if unavailable
    const std::uint8_t hbit = v.y ? kTopBit : kBottomBit;
    TransitionProbs t;
    if (here & hbit) t.right = el / norm;
    if (before & hbit) t.left = eml / norm;
    if (here & kVertBit) t.vertical = 1.0 / norm;
    t.stay = 1.0 - t.right - t.left - t.vertical;
    return t;
}

Walker::Walker(Environment& env, double lambda, Rng& rng, WalkOptions opts)
    : env_(&env), rng_(&rng), lambda_(lambda), opts_(std::move(opts)) {
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double norm = el + 1.0 + eml;
    thr_right_ = el / norm;
    thr_left_ = (el + eml) / norm;
    stats_.position = opts_.start;
    stats_.min_x = stats_.max_x = opts_.start.x;
    if (opts_.track_traps) {
        traps_.rebuild(env);
        stats_.trap_ledger.assign(traps_.pieces().size(), 0);
    }
    if (opts_.track_boundary_visits) {
        boundary_flag_.assign(env.cols.size(), 0);
        refresh_flags(0);
        if (opts_.start.y == 0 && env.in_range(opts_.start.x) &&
            boundary_flag_[static_cast<std::size_t>(opts_.start.x - env.x_lo)])
            hits_.push_back({opts_.start.x, 0});
    }
    if (opts_.record_positions) positions_.push_back(stats_.position);
    ensure_margins();
}

void Walker::refresh_flags(std::int64_t from_boundary_index) {
    for (std::size_t i = static_cast<std::size_t>(from_boundary_index);
         i < env_->cycle_boundaries.size(); ++i) {
        const std::int64_t b = env_->cycle_boundaries[i];
        if (env_->in_range(b)) boundary_flag_[static_cast<std::size_t>(b - env_->x_lo)] = 1;
    }
    consumed_boundaries_ = env_->cycle_boundaries.size();
}

void Walker::ensure_margins() {
    // Standing at x requires columns x-1 and x.
    const std::int64_t x = stats_.position.x;
    if (x + 1 > env_->x_hi() || x - 1 < env_->x_lo) {
        if (!opts_.chain)
            throw WindowExitError("walk reached level " + std::to_string(x) +
                                  " of window [" + std::to_string(env_->x_lo) + "," +
                                  std::to_string(env_->x_hi()) + "]");
        if (x + 1 > env_->x_hi()) {
            const std::int64_t old_hi = env_->x_hi();
            extend_right_cycles(*env_, *opts_.chain, *rng_, x + 1);
            if (opts_.track_traps) {
                traps_.extend_right(*env_, old_hi);
                stats_.trap_ledger.resize(traps_.pieces().size(), 0);
            }
            if (opts_.track_boundary_visits) {
                boundary_flag_.resize(env_->cols.size(), 0);
                refresh_flags(static_cast<std::int64_t>(consumed_boundaries_));
            }
        }
        if (x - 1 < env_->x_lo) {
            const std::int64_t shift_before = env_->x_lo;
            extend_left_cycles(*env_, *opts_.chain, *rng_, x - 1);
            const std::int64_t grown = shift_before - env_->x_lo;
            if (opts_.track_traps) {
                // Rebuild and carry the accumulated ledger over to the
                // re-sorted piece list (entrances identify pieces).
                const auto old_pieces = traps_.pieces();
                const auto old_ledger = stats_.trap_ledger;
                traps_.rebuild(*env_);
                stats_.trap_ledger.assign(traps_.pieces().size(), 0);
                std::size_t j = 0;
                for (std::size_t k = 0; k < old_pieces.size(); ++k) {
                    while (j < traps_.pieces().size() &&
                           traps_.pieces()[j].x_entrance < old_pieces[k].x_entrance)
                        ++j;
                    if (j < traps_.pieces().size()) stats_.trap_ledger[j] = old_ledger[k];
                }
            }
            if (opts_.track_boundary_visits) {
                boundary_flag_.insert(boundary_flag_.begin(), static_cast<std::size_t>(grown), 0);
            }
        }
    }
}

void Walker::step_once() {
    // Attribute the current time unit to the vertex occupied before the step.
    if (opts_.track_traps) {
        const int piece = traps_.piece_at(stats_.position.x, stats_.position.y);
        if (piece >= 0) {
            ++stats_.time_in_traps;
            ++stats_.trap_ledger[static_cast<std::size_t>(piece)];
        }
    }

    const double u = rng_->uniform();
    std::int64_t x = stats_.position.x;
    int y = stats_.position.y;
    const std::uint8_t hbit = y ? kTopBit : kBottomBit;
    const std::size_t idx = static_cast<std::size_t>(x - env_->x_lo);
    if (u < thr_right_) {
        if (env_->cols[idx] & hbit) ++x;
    } else if (u < thr_left_) {
        if (env_->cols[idx - 1] & hbit) --x;
    } else {
        if (env_->cols[idx] & kVertBit) y = 1 - y;
    }
    stats_.position = {x, y};
    ++stats_.time;
    if (x < stats_.min_x) stats_.min_x = x;
    if (x > stats_.max_x) stats_.max_x = x;
    ensure_margins();
    if (opts_.track_boundary_visits && y == 0 &&
        boundary_flag_[static_cast<std::size_t>(x - env_->x_lo)])
        hits_.push_back({x, stats_.time});
    if (opts_.record_positions) positions_.push_back(stats_.position);
}

StopReason Walker::run(const StopSpec& stop) {
    for (;;) {
        while (next_checkpoint_ < opts_.checkpoint_times.size() &&
               opts_.checkpoint_times[next_checkpoint_] == stats_.time) {
            checkpoints_.emplace_back(stats_.time, stats_.position.x);
            ++next_checkpoint_;
        }
        if (stop.horizon >= 0 && stats_.time >= stop.horizon) return StopReason::kHorizon;
        if (stop.x_threshold && stats_.position.x >= *stop.x_threshold)
            return StopReason::kXThreshold;
        if (stop.on_return_to_origin && stats_.time >= 1 && stats_.position == Vertex{0, 0})
            return StopReason::kReturnToOrigin;
        step_once();
    }
}

Trajectory Walker::take_trajectory(StopReason reason) {
    Trajectory t;
    t.stats = stats_;
    t.reason = reason;
    t.positions = std::move(positions_);
    t.checkpoints = checkpoints_;
    return t;
}

Trajectory simulate_walk(Environment& env, double lambda, Rng& rng, const StopSpec& stop,
                         WalkOptions opts) {
    Walker walker(env, lambda, rng, std::move(opts));
    const StopReason reason = walker.run(stop);
    return walker.take_trajectory(reason);
}

ExcursionResult simulate_trap_excursion(std::int64_t m, double lambda, Rng& rng, bool lazy) {
    if (m < 1) throw std::domain_error("simulate_trap_excursion: m must be >= 1");
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    ExcursionResult out;
    std::int64_t pos = 1;
    out.reached_bottom = (m == 1);  // a single-cell trap starts at the bottom
    if (!lazy) {
        const double p_right = el / (el + eml);
        while (pos != 0) {
            const double u = rng.uniform();
            if (pos < m) {
                pos += (u < p_right) ? 1 : -1;
            } else {
                // at m: stay with probability p_lambda, step left otherwise
                if (u >= p_right) --pos;
            }
            ++out.duration;
            if (pos == m) {
                if (out.reached_bottom) ++out.bottom_returns;
                out.reached_bottom = true;
            }
        }
    } else {
        const double norm = el + 1.0 + eml;
        const double t_right = el / norm, t_left = (el + eml) / norm;
        while (pos != 0) {
            const double u = rng.uniform();
            if (pos < m) {
                if (u < t_right) ++pos;
                else if (u < t_left) --pos;
            } else {
                if (u < eml / norm) --pos;  // left; otherwise stay
            }
            ++out.duration;
            if (pos == m) {
                if (out.reached_bottom) ++out.bottom_returns;
                out.reached_bottom = true;
            }
        }
    }
    return out;
}

KStepDistribution exact_k_step_distribution(const Environment& env, double lambda, Vertex start,
                                            int k, int cap, double exit_tol) {
    if (k > cap)
        throw std::domain_error("exact_k_step_distribution: k exceeds cap " + std::to_string(cap));
    if (!env.in_range(start.x)) throw MarginError("exact_k_step_distribution: start outside window");
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double norm = el + 1.0 + eml;
    const double p_r = el / norm, p_l = eml / norm, p_v = 1.0 / norm;
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
                const std::uint8_t here = env.cols[i];
                const std::uint8_t hbit = y ? kTopBit : kBottomBit;
                double stay = 0.0;
                // right
                if (here & hbit) {
                    if (i + 1 < n) next[2 * (i + 1) + y] += mass * p_r;
                    else dist.exit_mass += mass * p_r;
                } else {
                    stay += p_r;
                }
                // left
                if (i > 0) {
                    if (env.cols[i - 1] & hbit) next[2 * (i - 1) + y] += mass * p_l;
                    else stay += p_l;
                } else {
                    dist.exit_mass += mass * p_l;  // openness unknown beyond the window
                }
                // vertical
                if (here & kVertBit) next[2 * i + (1 - y)] += mass * p_v;
                else stay += p_v;
                next[2 * i + y] += mass * stay;
            }
        }
        dist.prob.swap(next);
    }
    if (dist.exit_mass > exit_tol)
        throw WindowExitError("exact_k_step_distribution: exit mass " +
                              std::to_string(dist.exit_mass) + " exceeds tolerance");
    return dist;
}

}  // namespace ladderwalk
