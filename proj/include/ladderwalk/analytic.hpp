// Closed-form quantities of the biased ladder walk: the critical bias, step
// probabilities, gambler's-ruin escape/absorption formulas, the first-passage
// generating function on Z, the trap-length law, the seven obstacle candidate
// probabilities of the coupled chain, and the electrical-network energy and
// escape bounds for the pruned walk.
//
// Everything here is a pure function of its arguments; callers may memoize.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace ladderwalk::analytic {

inline constexpr double kLambdaStar = 0.34657359027997264;  // log(2)/2

// Critical bias lambda_c(p). The radicand is clamped at 0 to absorb rounding
// for p near 1.
double critical_bias(double p);

// Derived per-(p, lambda) parameters of the walk.
struct BiasParams {
    double p = 0.0;            // retention probability
    double lambda = 0.0;       // bias
    double lambda_c = 0.0;     // critical bias for this p
    double alpha = 0.0;        // lambda_c / lambda (tail index)
    double p_lambda = 0.0;     // right-step probability of the non-lazy line walk
    double q_lambda = 0.0;     // left-step probability
    double gamma = 0.0;        // q_lambda / p_lambda = e^{-2 lambda}
    double p_esc = 0.0;        // (1 - e^{-lambda}) / (e^{lambda} + 1 + e^{-lambda})
    double big_r = 0.0;        // mean first passage E[sigma_1^Z] = 1/(1 - 2 q_lambda)
    double lambda_star = kLambdaStar;
    bool above_lambda_star = false;  // lambda > log(2)/2 (tail-estimate validity region)
};
BiasParams bias_params(double p, double lambda);

// Gambler's-ruin package for the line segment {0, ..., m}.
struct RuinQuantities {
    std::int64_t m = 0;
    double e_m = 0.0;         // escape without rebound from the bottom
    double e_prime_m = 0.0;   // e^l/(e^l+1+e^-l) * (1-e^{-2l})/(1-e^{-2lm})
    double hit_bottom = 0.0;  // P_1(sigma_m < sigma_0) = (1-gamma)/(1-gamma^m)
    std::vector<double> h;    // h[y] = P_y(sigma_0 < sigma_m), y = 0..m
};
RuinQuantities ruin_quantities(std::int64_t m, double lambda);

// E[x^{sigma_1^Z}] for the biased walk on Z; real branch requires
// 0 < x <= 1/(2 sqrt(p_lambda q_lambda)).
double first_passage_mgf(double x, double lambda);

// Geometric trap-length pmf (e^{2 lambda_c} - 1) e^{-2 lambda_c m}, m >= 1.
double trap_length_pmf(std::int64_t m, double p);
double trap_length_mean(double p);

// The seven candidate probabilities at an obstacle whose re-inserted trap has
// length L, in the fixed order below. `valid` is false when any entry falls
// outside [0,1]: the coupling cannot be run at these (lambda, L).
enum ObstacleMove : int {
    kBothRightExitRight = 0,  // (u+1, v+1, w=+1)
    kBothLeft = 1,            // (u-1, v-1, w=0)
    kBothVertical = 2,        // (u', v', w=0)
    kLeftRightExitRight = 3,  // (u-1, v+1, w=+1)
    kLeftRightExitLeft = 4,   // (u-1, v+1, w=-1)
    kVertRightExitRight = 5,  // (u', v+1, w=+1)
    kVertRightExitLeft = 6,   // (u', v+1, w=-1)
};
struct ObstacleTransitions {
    std::array<double, 7> prob{};
    bool valid = false;   // all entries in [0,1]
    double sum = 0.0;     // always 1 up to rounding
};
ObstacleTransitions obstacle_transitions(double lambda, std::int64_t L);

// Energy of the unit flow through the pruned environment (finite iff
// lambda > log(2)/2; +infinity is a legal return) and the uniform
// escape-probability lower bound derived from it (0 when the energy is infinite).
struct PrunedEnergyBound {
    double energy = 0.0;
    double escape_lower_bound = 0.0;
};
PrunedEnergyBound pruned_energy_bound(double lambda);

}  // namespace ladderwalk::analytic
