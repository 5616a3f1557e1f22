#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "ladderwalk/analytic.hpp"
#include "ladderwalk/rice.hpp"

using namespace ladderwalk;

namespace {

rice::RiceConfig critical_config(rice::Variant variant) {
    const double p = 0.5;
    return rice::make_rice_config(p, analytic::critical_bias(p), variant);
}

}  // namespace

TEST_CASE("config invariants") {
    for (double mult : {1.0, 1.0 / 1.5, 1.0 / 0.8}) {
        const double lambda = analytic::critical_bias(0.5) * mult;
        const auto cfg = rice::make_rice_config(0.5, lambda);
        const double drift = std::tanh(lambda);
        // the defining double inequality of the tilt
        CHECK(drift * std::pow(cfg.gamma, -static_cast<double>(cfg.t)) <= 1.0 + 1e-12);
        CHECK(drift * std::pow(cfg.gamma, -static_cast<double>(cfg.t + 1)) > 1.0);
        CHECK(cfg.x == doctest::Approx(drift * std::pow(cfg.gamma, -static_cast<double>(cfg.t)))
                           .epsilon(1e-12));
        CHECK(cfg.x > 0.0);
        CHECK(cfg.x <= 1.0);
        CHECK(cfg.mu_hat > 0.0);
    }
}

TEST_CASE("geometric route identities at n0 = 0") {
    const auto simple = critical_config(rice::Variant::kSimple);
    const auto squared = critical_config(rice::Variant::kSquared);
    const double ga = std::pow(simple.gamma, simple.alpha);
    CHECK(rice::alt_sum_geometric(0.0, simple) == doctest::Approx(1.0 / (1.0 - ga)).epsilon(1e-13));
    CHECK(rice::alt_sum_geometric(0.0, squared) ==
          doctest::Approx(ga / ((1.0 - ga) * (1.0 - ga))).epsilon(1e-13));

    // positive and strictly decreasing in n0
    double prev = rice::alt_sum_geometric(0.0, simple);
    for (double n0 : {1.0, 3.0, 10.0, 100.0, 1000.0}) {
        const double v = rice::alt_sum_geometric(n0, simple);
        CHECK(v > 0.0);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("direct route: two-term exact value and route equivalence") {
    for (auto variant : {rice::Variant::kSimple, rice::Variant::kSquared}) {
        const auto cfg = critical_config(variant);
        const double ga = std::pow(cfg.gamma, cfg.alpha);
        const double ga1 = ga * cfg.gamma;
        double expect;
        if (variant == rice::Variant::kSimple)
            expect = 1.0 / (1.0 - ga) - cfg.x / (1.0 - ga1);
        else
            expect = ga / ((1.0 - ga) * (1.0 - ga)) - cfg.x * ga1 / ((1.0 - ga1) * (1.0 - ga1));
        CHECK(rice::alt_sum_direct(1, cfg) == doctest::Approx(expect).epsilon(1e-13));
    }

    // cross-route equivalence to 1e-10 relative on the shared grid
    for (auto variant : {rice::Variant::kSimple, rice::Variant::kSquared}) {
        const auto cfg = critical_config(variant);
        for (std::int64_t n0 : {10, 100, 1000, 10000}) {
            const double direct = rice::alt_sum_direct(n0, cfg);
            const double geometric = rice::alt_sum_geometric(static_cast<double>(n0), cfg);
            CHECK(std::fabs(direct - geometric) / std::fabs(direct) < 1e-10);
        }
    }
    const auto cfg = critical_config(rice::Variant::kSimple);
    CHECK_THROWS_AS(rice::alt_sum_direct(cfg.direct_cap + 1, cfg), std::domain_error);
}

TEST_CASE("naive double evaluation cancels catastrophically at n0 = 200") {
    const auto cfg = critical_config(rice::Variant::kSimple);
    const double truth = rice::alt_sum_direct(200, cfg);
    const double naive = rice::alt_sum_direct_naive(200, cfg);
    const double geometric = rice::alt_sum_geometric(200.0, cfg);
    CHECK(std::fabs(naive - truth) / std::fabs(truth) > 1e-3);      // lost to cancellation
    CHECK(std::fabs(geometric - truth) / std::fabs(truth) < 1e-10);  // all-positive route holds
}

TEST_CASE("residue series") {
    for (auto variant : {rice::Variant::kSimple, rice::Variant::kSquared}) {
        const auto cfg = critical_config(variant);
        // term magnitudes decrease monotonically beyond |k| = 1 for n0 >= 10;
        // the default K = 20 is tight at n0 = 10, so widen the truncation there
        auto wide = cfg;
        wide.K = 32;
        for (double n0 : {10.0, 100.0, 10000.0}) {
            const auto res = rice::residue_series(n0, n0 < 50.0 ? wide : cfg);
            CHECK(res.converged);
            for (std::size_t k = 2; k < res.term_magnitude.size(); ++k)
                CHECK(res.term_magnitude[k] <= res.term_magnitude[k - 1] * (1.0 + 1e-12));
        }
        // the n0 = 10 default-K tail bound is correctly reported as not met
        CHECK_FALSE(rice::residue_series(10.0, cfg).converged);
        // large-n0 agreement with the geometric route
        const double n0 = 10000.0;
        const double resv = rice::residue_series(n0, cfg).value;
        const double geo = rice::alt_sum_geometric(n0, cfg);
        CHECK(std::fabs(resv - geo) / std::fabs(geo) < 0.01);
    }

    // log-periodic leading constant: period gamma^{-1} in n0
    const auto cfg = critical_config(rice::Variant::kSimple);
    for (double n0 : {1000.0, 3000.0, 10000.0}) {
        const double c1 = rice::residue_series(n0, cfg).leading_constant;
        const double c2 = rice::residue_series(n0 / cfg.gamma, cfg).leading_constant;
        CHECK(std::fabs(c1 - c2) / std::fabs(c1) < 1e-3);
    }
}

TEST_CASE("scaling profiles stay bounded") {
    std::vector<double> grid;
    for (double n0 = 10.0; n0 <= 10000.0 * 1.0001; n0 *= std::pow(10.0, 0.2)) grid.push_back(n0);
    for (double alpha : {1.0, 1.5}) {
        const double lambda = analytic::critical_bias(0.5) / alpha;
        for (auto variant : {rice::Variant::kSimple, rice::Variant::kSquared}) {
            const auto cfg = rice::make_rice_config(0.5, lambda, variant);
            const auto rows = rice::scaling_profile(cfg, grid);
            double lo = 1e300, hi = 0.0;
            for (const auto& row : rows) {
                lo = std::min(lo, row.normalized);
                hi = std::max(hi, row.normalized);
            }
            CHECK(hi / lo <= 10.0);
        }
    }
}

TEST_CASE("excursion bound function and mu_hat") {
    for (double lambda : {0.5, 0.83, 1.2}) {
        const double el = std::exp(lambda), eml = std::exp(-lambda);
        const double q = eml / (el + eml);
        CHECK(rice::excursion_bound_f(0.0, lambda) == doctest::Approx(1.0).epsilon(1e-12));
        const double h = 1e-7;
        const double deriv = (rice::excursion_bound_f(h, lambda) - 1.0) / h;
        CHECK(deriv == doctest::Approx(-1.0 / (1.0 - 2.0 * q)).epsilon(1e-4));
        const double mu_hat = rice::find_mu_hat(lambda);
        CHECK(mu_hat > 0.0);
        CHECK(rice::excursion_bound_f(mu_hat, lambda) <= 1.0 - 1e-3 + 1e-12);
        // maximality: slightly beyond mu_hat the bound is violated or the
        // domain ends
        const double mu_max = 0.5 * std::log(1.0 / (4.0 * (1.0 - q) * q));
        if (mu_hat < mu_max - 1e-9)
            CHECK(rice::excursion_bound_f(std::min(mu_max, mu_hat + 1e-6), lambda) > 1.0 - 1e-3);
    }
}

TEST_CASE("complex special functions") {
    // real axis agreement with lgamma
    for (double x : {0.7, 1.0, 2.5, 10.3}) {
        const auto lg = rice::log_gamma({x, 0.0});
        CHECK(lg.real() == doctest::Approx(std::lgamma(x)).epsilon(1e-12));
        CHECK(std::fabs(std::remainder(lg.imag(), 2.0 * M_PI)) < 1e-10);
    }
    // conjugate symmetry through the exponential
    const std::complex<double> z{1.3, 2.7};
    const auto a = std::exp(rice::log_gamma(z));
    const auto b = std::exp(rice::log_gamma(std::conj(z)));
    CHECK(std::abs(a - std::conj(b)) / std::abs(a) < 1e-11);

    // digamma as the derivative of log_gamma (finite differences, real axis)
    for (double x : {0.9, 3.2, 14.0}) {
        const double h = 1e-6;
        const double want = (std::lgamma(x + h) - std::lgamma(x - h)) / (2.0 * h);
        CHECK(rice::digamma({x, 0.0}).real() == doctest::Approx(want).epsilon(1e-7));
    }
    // functional equation off the real axis
    const std::complex<double> w{0.4, -1.9};
    const auto lhs = rice::digamma(w + 1.0);
    const auto rhs = rice::digamma(w) + 1.0 / w;
    CHECK(std::abs(lhs - rhs) < 1e-11);
}
