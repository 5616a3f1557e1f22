#include "ladderwalk/analytic.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ladderwalk::analytic {

double critical_bias(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("critical_bias: p must be in (0,1)");
    const double radicand = 1.0 + 4.0 * p * p - 8.0 * p * p * p + 4.0 * p * p * p * p;
    const double root = std::sqrt(std::max(radicand, 0.0));
    const double denom = 1.0 + 2.0 * p - 2.0 * p * p - root;
    return 0.5 * std::log(2.0 / denom);
}

BiasParams bias_params(double p, double lambda) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("bias_params: p must be in (0,1)");
    if (!(lambda > 0.0)) throw std::domain_error("bias_params: lambda must be positive");
    BiasParams b;
    b.p = p;
    b.lambda = lambda;
    b.lambda_c = critical_bias(p);
    b.alpha = b.lambda_c / lambda;
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    b.p_lambda = el / (el + eml);
    b.q_lambda = eml / (el + eml);
    b.gamma = std::exp(-2.0 * lambda);
    b.p_esc = (1.0 - eml) / (el + 1.0 + eml);
    b.big_r = 1.0 / (1.0 - 2.0 * b.q_lambda);
    b.above_lambda_star = lambda > kLambdaStar;
    return b;
}

RuinQuantities ruin_quantities(std::int64_t m, double lambda) {
    if (m < 1) throw std::domain_error("ruin_quantities: m must be >= 1");
    if (!(lambda > 0.0)) throw std::domain_error("ruin_quantities: lambda must be positive");
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double p_l = el / (el + eml);
    const double gamma = std::exp(-2.0 * lambda);
    const double gm = std::pow(gamma, static_cast<double>(m));
    RuinQuantities r;
    r.m = m;
    r.e_m = gm * p_l * (1.0 - gamma) / (1.0 - gm);
    r.e_prime_m = el / (el + 1.0 + eml) * (1.0 - gamma) / (1.0 - gm);
    r.hit_bottom = (1.0 - gamma) / (1.0 - gm);
    r.h.resize(static_cast<std::size_t>(m) + 1);
    for (std::int64_t y = 0; y <= m; ++y)
        r.h[static_cast<std::size_t>(y)] = (std::pow(gamma, static_cast<double>(y)) - gm) / (1.0 - gm);
    return r;
}

double first_passage_mgf(double x, double lambda) {
    if (!(lambda > 0.0)) throw std::domain_error("first_passage_mgf: lambda must be positive");
    if (!(x > 0.0)) throw std::domain_error("first_passage_mgf: x must be positive");
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double p_l = el / (el + eml), q_l = eml / (el + eml);
    const double radicand = 1.0 - 4.0 * p_l * q_l * x * x;
    if (radicand < 0.0) throw std::domain_error("first_passage_mgf: x beyond the real branch");
    return (1.0 - std::sqrt(radicand)) / (2.0 * q_l * x);
}

double trap_length_pmf(std::int64_t m, double p) {
    if (m < 1) throw std::domain_error("trap_length_pmf: m must be >= 1");
    const double lc = critical_bias(p);
    return (std::exp(2.0 * lc) - 1.0) * std::exp(-2.0 * lc * static_cast<double>(m));
}

double trap_length_mean(double p) {
    const double lc = critical_bias(p);
    return 1.0 / (1.0 - std::exp(-2.0 * lc));
}

ObstacleTransitions obstacle_transitions(double lambda, std::int64_t L) {
    if (!(lambda > 0.0)) throw std::domain_error("obstacle_transitions: lambda must be positive");
    if (L < 1) throw std::domain_error("obstacle_transitions: L must be >= 1");
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double denom_all = el + 1.0 + eml;   // lazy normalizer
    const double denom_obs = el + 1.0;         // obstacle normalizer, e^l(1-e^{-2l}) + 1 + e^{-l}
    const double b = 1.0 + eml;
    const double t1 = (el - eml) / denom_obs;
    const double e_prime = ruin_quantities(L + 1, lambda).e_prime_m;

    ObstacleTransitions out;
    out.prob[kBothRightExitRight] = t1;
    out.prob[kBothLeft] = eml / denom_all;
    out.prob[kBothVertical] = 1.0 / denom_all;
    out.prob[kLeftRightExitRight] = eml / b * (e_prime - t1);
    out.prob[kLeftRightExitLeft] = eml * (1.0 / b - 1.0 / denom_all - e_prime / b);
    out.prob[kVertRightExitRight] = 1.0 / b * (e_prime - t1);
    out.prob[kVertRightExitLeft] = 1.0 / b - 1.0 / denom_all - e_prime / b;

    out.valid = true;
    out.sum = 0.0;
    for (double q : out.prob) {
        out.sum += q;
        if (!(q >= 0.0 && q <= 1.0)) out.valid = false;
    }
    if (std::fabs(out.sum - 1.0) > 1e-12) out.valid = false;
    return out;
}

PrunedEnergyBound pruned_energy_bound(double lambda) {
    if (!(lambda > 0.0)) throw std::domain_error("pruned_energy_bound: lambda must be positive");
    PrunedEnergyBound out;
    const double el = std::exp(lambda);
    const double gamma = std::exp(-2.0 * lambda);
    const double ratio = gamma / (1.0 - gamma);
    if (ratio >= 1.0) {
        out.energy = std::numeric_limits<double>::infinity();
        out.escape_lower_bound = 0.0;
        return out;
    }
    const double geom = ratio / (1.0 - ratio);  // sum_{n>=1} ratio^n
    out.energy = 1.0 + 2.0 * el * geom;
    out.escape_lower_bound = 1.0 / (3.0 * el * (1.0 + 2.0 * el * el * geom));
    return out;
}

}  // namespace ladderwalk::analytic
