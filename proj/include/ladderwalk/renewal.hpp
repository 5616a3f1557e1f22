// Renewal counting with Pareto-tailed increments: first-passage simulation and
// uniform-integrability profiles.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ladderwalk/rng.hpp"

namespace ladderwalk::renewal {

enum class IncrementKind { kPareto, kDeterministic };

struct RenewalSpec {
    double alpha = 1.5;  // (1, 2]
    double d = 1.0;      // tail scale: P(xi > t) = d t^{-alpha} for t >= d^{1/alpha}
    double x_m = 1.0;    // Pareto scale d^{1/alpha}
    double mu = 3.0;     // E[xi_2] = alpha x_m / (alpha - 1)
    IncrementKind kind = IncrementKind::kPareto;
    bool heavy_first = false;     // xi_1 Pareto with index first_alpha instead
    double first_alpha = 1.05;
    bool misnormalized = false;   // negative control: a(t) = sqrt(t) at alpha = 2

    double a(double t) const;     // t^{1/alpha}, sqrt(t log t) at alpha = 2
    double draw_increment(Rng& rng, bool first) const;
};

RenewalSpec make_renewal_spec(double alpha, double d, IncrementKind kind = IncrementKind::kPareto);

// nu(t) = inf{n : S_n > t}; exact first-passage index.
std::int64_t simulate_first_passage(const RenewalSpec& spec, double t, Rng& rng);

struct UiProfileRow {
    double t = 0.0;
    double exp_moment = 0.0;  // mean exp(theta (nu(t) - t/mu)/a(t))
    double exp_lo = 0.0, exp_hi = 0.0;
    double neg_moment = 0.0;  // mean ((nu(t) - t/mu)/a(t))_-^p
    double neg_lo = 0.0, neg_hi = 0.0;
};

// One row per grid point; replicas use common random numbers across t (the
// same increment substream is replayed), so profiles compare cleanly.
std::vector<UiProfileRow> ui_profile(const RenewalSpec& spec, std::span<const double> t_grid,
                                     double theta, double p_neg, int replicas, std::uint64_t seed,
                                     int workers = 1);

}  // namespace ladderwalk::renewal
