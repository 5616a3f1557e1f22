#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ladderwalk/analytic.hpp"
#include "ladderwalk/rng.hpp"

using namespace ladderwalk;

namespace {

// Path-counting oracle for the biased walk on Z:
// P(sigma_1^Z = 2j+1) = binom(2j+1, j)/(2j+1) p^{j+1} q^j (Catalan numbers).
double first_passage_series_oracle(double x, double lambda, int k_max, double* remainder_bound) {
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double p = el / (el + eml), q = eml / (el + eml);
    double sum = 0.0;
    double catalan = 1.0;  // C_0
    double last = 0.0;
    for (int j = 0; 2 * j + 1 <= k_max; ++j) {
        if (j > 0) catalan *= 2.0 * (2.0 * j - 1.0) / (j + 1.0);
        last = catalan * std::pow(p, j + 1) * std::pow(q, j) * std::pow(x, 2 * j + 1);
        sum += last;
    }
    // terms decay at least geometrically with ratio 4 p q x^2 < 1
    const double ratio = 4.0 * p * q * x * x;
    *remainder_bound = last * ratio / (1.0 - ratio);
    return sum;
}

}  // namespace

TEST_CASE("critical bias closed form and properties") {
    // lambda_c(1/2) = (1/2) log(4/(3 - sqrt 5))
    const double expect = 0.5 * std::log(4.0 / (3.0 - std::sqrt(5.0)));
    CHECK(analytic::critical_bias(0.5) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(analytic::critical_bias(0.5) == doctest::Approx(0.8278).epsilon(2e-4));

    // p -> 1: diverges
    CHECK(analytic::critical_bias(0.999999) > 6.0);
    CHECK(analytic::critical_bias(0.9999999999) > analytic::critical_bias(0.999999));

    // unique minimizer at p = 1/2; grid check of lambda_c > log(2)/2
    const double at_half = analytic::critical_bias(0.5);
    for (int i = 1; i <= 99; ++i) {
        const double p = i / 100.0;
        CHECK(analytic::critical_bias(p) >= at_half - 1e-12);
        CHECK(analytic::critical_bias(p) > analytic::kLambdaStar);
    }
    CHECK_THROWS_AS(analytic::critical_bias(0.0), std::domain_error);
    CHECK_THROWS_AS(analytic::critical_bias(1.0), std::domain_error);
}

TEST_CASE("bias params invariants") {
    for (double p : {0.2, 0.5, 0.9}) {
        for (double mult : {0.5, 1.0, 1.9}) {
            const double lambda = mult * analytic::critical_bias(p);
            const auto b = analytic::bias_params(p, lambda);
            CHECK(b.p_lambda + b.q_lambda == doctest::Approx(1.0).epsilon(1e-15));
            CHECK(b.gamma == doctest::Approx(b.q_lambda / b.p_lambda).epsilon(1e-14));
            CHECK(b.gamma == doctest::Approx(std::exp(-2.0 * lambda)).epsilon(1e-14));
            CHECK(b.gamma > 0.0);
            CHECK(b.gamma < 1.0);
            CHECK(b.alpha == doctest::Approx(1.0 / mult).epsilon(1e-12));
            CHECK(b.big_r == doctest::Approx(1.0 / (b.p_lambda - b.q_lambda)).epsilon(1e-12));
            CHECK(b.big_r > 1.0);
            CHECK(b.p_esc > 0.0);
            CHECK(b.p_esc < 1.0);
        }
    }
    // validity flag boundary: lambda = log(2)/2 excluded
    CHECK_FALSE(analytic::bias_params(0.5, analytic::kLambdaStar).above_lambda_star);
    CHECK(analytic::bias_params(0.5, analytic::kLambdaStar + 1e-9).above_lambda_star);
    CHECK_THROWS_AS(analytic::bias_params(0.5, 0.0), std::domain_error);
    CHECK_THROWS_AS(analytic::bias_params(1.5, 1.0), std::domain_error);
}

TEST_CASE("ruin quantities") {
    // m = 1 collapses to e_1 = q_lambda
    for (double lambda : {0.3, 0.8, 1.5}) {
        const auto b = analytic::bias_params(0.5, lambda);
        const auto r = analytic::ruin_quantities(1, lambda);
        CHECK(r.e_m == doctest::Approx(b.q_lambda).epsilon(1e-12));
    }
    // absorbing boundaries of h; monotonicity in m and y
    double prev_e = 1.0, prev_hit = 1.1;
    for (std::int64_t m = 1; m <= 12; ++m) {
        const auto r = analytic::ruin_quantities(m, 0.5);
        CHECK(r.h.front() == doctest::Approx(1.0));
        CHECK(r.h.back() == doctest::Approx(0.0));
        for (std::size_t y = 1; y < r.h.size(); ++y) CHECK(r.h[y] < r.h[y - 1]);
        CHECK(r.e_m < prev_e);
        CHECK(r.hit_bottom < prev_hit);
        prev_e = r.e_m;
        prev_hit = r.hit_bottom;
    }
    CHECK_THROWS_AS(analytic::ruin_quantities(0, 1.0), std::domain_error);
}

TEST_CASE("first passage generating function") {
    // x = 1: almost-sure passage
    for (double lambda : {0.3, 0.9, 2.0})
        CHECK(analytic::first_passage_mgf(1.0, lambda) == doctest::Approx(1.0).epsilon(1e-12));

    // one-sided derivative at x = 1 equals R = 1/(p-q)
    const double lambda = 0.7;
    const auto b = analytic::bias_params(0.5, lambda);
    const double h = 1e-7;
    const double deriv =
        (analytic::first_passage_mgf(1.0, lambda) - analytic::first_passage_mgf(1.0 - h, lambda)) /
        h;
    CHECK(deriv == doctest::Approx(b.big_r).epsilon(1e-4));

    // x = 0.5, lambda = 1 against the exact path-counting series up to k = 41
    double remainder = 0.0;
    const double oracle = first_passage_series_oracle(0.5, 1.0, 41, &remainder);
    const double value = analytic::first_passage_mgf(0.5, 1.0);
    CHECK(std::fabs(value - oracle) <= remainder + 1e-14);
    CHECK(remainder < 1e-8);

    // fixed point f(x) = p x + q x f(x)^2 on a grid of valid x
    for (double x = 0.05; x <= 1.0; x += 0.05) {
        const double f = analytic::first_passage_mgf(x, lambda);
        CHECK(f == doctest::Approx(b.p_lambda * x + b.q_lambda * x * f * f).epsilon(1e-12));
    }
    CHECK_THROWS_AS(analytic::first_passage_mgf(10.0, 0.1), std::domain_error);
}

TEST_CASE("trap length pmf") {
    const double p = 0.5;
    double sum = 0.0;
    for (std::int64_t m = 1; m <= 4000; ++m) sum += analytic::trap_length_pmf(m, p);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    // mean by the geometric-series identity
    double mean = 0.0;
    for (std::int64_t m = 1; m <= 4000; ++m)
        mean += static_cast<double>(m) * analytic::trap_length_pmf(m, p);
    CHECK(mean == doctest::Approx(analytic::trap_length_mean(p)).epsilon(1e-12));

    // constant ratio e^{2 lambda_c}
    const double ratio = analytic::trap_length_pmf(1, p) / analytic::trap_length_pmf(2, p);
    CHECK(ratio == doctest::Approx(std::exp(2.0 * analytic::critical_bias(p))).epsilon(1e-12));
    CHECK_THROWS_AS(analytic::trap_length_pmf(0, p), std::domain_error);
}

TEST_CASE("obstacle transitions") {
    // law of total probability on a parameter grid, valid or not
    for (double lambda : {0.1, 0.2, 0.37, 0.5, 0.828, 1.0, 2.0}) {
        for (std::int64_t L : {1, 2, 3, 5, 10}) {
            const auto ot = analytic::obstacle_transitions(lambda, L);
            CHECK(ot.sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }

    // lambda = 1, L = 3: direct evaluation of the seven formulas
    {
        const double lambda = 1.0;
        const std::int64_t L = 3;
        const double el = std::exp(lambda), eml = std::exp(-lambda);
        const double A = el + 1.0 + eml, B = 1.0 + eml;
        const double t1 = (el - eml) / (el + 1.0);
        const double ep = el / A * (1.0 - std::exp(-2.0 * lambda)) /
                          (1.0 - std::exp(-2.0 * lambda * (L + 1)));
        const auto ot = analytic::obstacle_transitions(lambda, L);
        CHECK(ot.prob[analytic::kBothRightExitRight] == doctest::Approx(t1).epsilon(1e-14));
        CHECK(ot.prob[analytic::kBothLeft] == doctest::Approx(eml / A).epsilon(1e-14));
        CHECK(ot.prob[analytic::kBothVertical] == doctest::Approx(1.0 / A).epsilon(1e-14));
        CHECK(ot.prob[analytic::kLeftRightExitRight] ==
              doctest::Approx(eml / B * (ep - t1)).epsilon(1e-12));
        CHECK(ot.prob[analytic::kLeftRightExitLeft] ==
              doctest::Approx(eml * (1.0 / B - 1.0 / A - ep / B)).epsilon(1e-12));
        CHECK(ot.prob[analytic::kVertRightExitRight] ==
              doctest::Approx(1.0 / B * (ep - t1)).epsilon(1e-12));
        CHECK(ot.prob[analytic::kVertRightExitLeft] ==
              doctest::Approx(1.0 / B - 1.0 / A - ep / B).epsilon(1e-12));
        // e'_4 < (e - 1/e)/(e + 1) at lambda = 1: infeasible here, flag records it
        CHECK_FALSE(ot.valid);
    }

    // L -> infinity limit of the two (e'_{L+1} - t1)-proportional entries
    {
        const double lambda = 1.0;
        const double el = std::exp(lambda), eml = std::exp(-lambda);
        const double A = el + 1.0 + eml, B = 1.0 + eml;
        const double t1 = (el - eml) / (el + 1.0);
        const double ep_inf = (el - eml) / A;
        const auto big = analytic::obstacle_transitions(lambda, 4000);
        CHECK(big.prob[analytic::kLeftRightExitRight] ==
              doctest::Approx(eml / B * (ep_inf - t1)).epsilon(1e-10));
        CHECK(big.prob[analytic::kVertRightExitRight] ==
              doctest::Approx(1.0 / B * (ep_inf - t1)).epsilon(1e-10));
    }

    // the feasibility frontier: gamma^{L+1} (e^l + 1 + e^-l) >= e^-l
    for (double lambda : {0.15, 0.25, 0.30, 0.36, 0.40, 0.60}) {
        for (std::int64_t L : {1, 2, 3, 4}) {
            const double gamma = std::exp(-2.0 * lambda);
            const bool predicted = std::pow(gamma, static_cast<double>(L + 1)) *
                                       (std::exp(lambda) + 1.0 + std::exp(-lambda)) >=
                                   std::exp(-lambda) * (1.0 - 1e-12);
            CHECK(analytic::obstacle_transitions(lambda, L).valid == predicted);
        }
    }
    CHECK_THROWS_AS(analytic::obstacle_transitions(1.0, 0), std::domain_error);
}

TEST_CASE("pruned energy bound") {
    // boundary: infinite at lambda = log(2)/2
    CHECK(std::isinf(analytic::pruned_energy_bound(analytic::kLambdaStar).energy));
    CHECK(std::isinf(analytic::pruned_energy_bound(0.2).energy));

    // closed form at lambda = 1
    const double gamma = std::exp(-2.0);
    const double r = gamma / (1.0 - gamma);
    const double expect = 1.0 + 2.0 * std::exp(1.0) * r / (1.0 - r);
    CHECK(analytic::pruned_energy_bound(1.0).energy == doctest::Approx(expect).epsilon(1e-13));

    // escape bound is a probability whenever the energy is finite
    for (double lambda : {0.4, 0.7, 1.0, 2.0}) {
        const auto eb = analytic::pruned_energy_bound(lambda);
        CHECK(std::isfinite(eb.energy));
        CHECK(eb.escape_lower_bound > 0.0);
        CHECK(eb.escape_lower_bound < 1.0);
    }
}
