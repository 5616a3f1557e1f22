#include "ladderwalk/rice.hpp"

#include <mpfr.h>

#include <cmath>
#include <stdexcept>
#include <string>

#include "ladderwalk/analytic.hpp"

namespace ladderwalk::rice {

RiceConfig make_rice_config(double p, double lambda, Variant variant, int K) {
    if (!(lambda > 0.0)) throw std::domain_error("make_rice_config: lambda must be positive");
    RiceConfig cfg;
    cfg.p = p;
    cfg.lambda = lambda;
    cfg.alpha = analytic::critical_bias(p) / lambda;
    cfg.gamma = std::exp(-2.0 * lambda);
    cfg.variant = variant;
    cfg.K = K;
    const double drift = std::tanh(lambda);  // p_lambda - q_lambda
    // (p_l - q_l) gamma^{-t} <= 1 < (p_l - q_l) gamma^{-(t+1)}
    cfg.t = static_cast<std::int64_t>(std::floor(std::log(drift) / std::log(cfg.gamma)));
    if (cfg.t < 0) cfg.t = 0;
    while (drift * std::pow(cfg.gamma, -static_cast<double>(cfg.t)) > 1.0) --cfg.t;
    while (drift * std::pow(cfg.gamma, -static_cast<double>(cfg.t + 1)) <= 1.0) ++cfg.t;
    if (cfg.t < 0)
        throw std::domain_error("make_rice_config: no admissible tilt (drift too large)");
    cfg.x = drift * std::pow(cfg.gamma, -static_cast<double>(cfg.t));
    cfg.mu_hat = find_mu_hat(lambda);
    return cfg;
}

double alt_sum_geometric(double n0, const RiceConfig& cfg) {
    if (n0 < 0.0) throw std::domain_error("alt_sum_geometric: n0 must be >= 0");
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0 && cfg.x > 0.0 && cfg.x <= 1.0))
        throw std::invalid_argument("alt_sum_geometric: invalid config");
    const double ga = std::pow(cfg.gamma, cfg.alpha);
    double gak = 1.0;  // gamma^{alpha k}
    double gk = 1.0;   // gamma^k
    double sum = 0.0;
    for (std::int64_t k = 0;; ++k) {
        const double base = 1.0 - cfg.x * gk;
        const double w = cfg.variant == Variant::kSimple ? 1.0 : static_cast<double>(k);
        const double term = w * gak * (n0 == 0.0 ? 1.0 : std::pow(base, n0));
        sum += term;
        gak *= ga;
        gk *= cfg.gamma;
        if (k > cfg.t + 8 && term < 1e-18 * sum) break;
        if (k > 100000000)
            throw std::runtime_error("alt_sum_geometric: series failed to converge");
    }
    return sum;
}

namespace {

struct MpfrValue {
    mpfr_t v;
    explicit MpfrValue(mpfr_prec_t prec) { mpfr_init2(v, prec); }
    ~MpfrValue() { mpfr_clear(v); }
    MpfrValue(const MpfrValue&) = delete;
    MpfrValue& operator=(const MpfrValue&) = delete;
};

}  // namespace

double alt_sum_direct(std::int64_t n0, const RiceConfig& cfg) {
    if (n0 < 0) throw std::domain_error("alt_sum_direct: n0 must be >= 0");
    if (n0 > cfg.direct_cap)
        throw std::domain_error("alt_sum_direct: n0 exceeds the precision budget cap " +
                                std::to_string(cfg.direct_cap));
    // The alternating sum cancels down ~n0 bits; keep n0 + 128 bits.
    const mpfr_prec_t prec = static_cast<mpfr_prec_t>(n0 + 128);
    const mpfr_rnd_t rnd = MPFR_RNDN;

    MpfrValue gamma(prec), galpha(prec), gpow(prec), x(prec), xpow(prec), binom(prec);
    MpfrValue term(prec), denom(prec), sum(prec), tmp(prec);
    mpfr_set_d(gamma.v, cfg.gamma, rnd);
    // gamma^alpha = exp(alpha log gamma)
    mpfr_log(tmp.v, gamma.v, rnd);
    mpfr_mul_d(tmp.v, tmp.v, cfg.alpha, rnd);
    mpfr_exp(galpha.v, tmp.v, rnd);
    mpfr_set(gpow.v, galpha.v, rnd);  // gamma^{alpha+j}, j = 0
    mpfr_set_d(x.v, cfg.x, rnd);
    mpfr_set_ui(xpow.v, 1, rnd);
    mpfr_set_ui(binom.v, 1, rnd);
    mpfr_set_zero(sum.v, 1);

    for (std::int64_t j = 0; j <= n0; ++j) {
        // term = binom * x^j * phi(j), phi = 1/(1-g) or g/(1-g)^2
        mpfr_ui_sub(denom.v, 1, gpow.v, rnd);
        if (cfg.variant == Variant::kSimple) {
            mpfr_ui_div(term.v, 1, denom.v, rnd);
        } else {
            mpfr_mul(tmp.v, denom.v, denom.v, rnd);
            mpfr_div(term.v, gpow.v, tmp.v, rnd);
        }
        mpfr_mul(term.v, term.v, binom.v, rnd);
        mpfr_mul(term.v, term.v, xpow.v, rnd);
        if (j & 1) mpfr_sub(sum.v, sum.v, term.v, rnd);
        else mpfr_add(sum.v, sum.v, term.v, rnd);

        if (j == n0) break;
        // binom <- binom * (n0 - j) / (j + 1); stays integral, representable exactly
        mpfr_mul_si(binom.v, binom.v, static_cast<long>(n0 - j), rnd);
        mpfr_div_si(binom.v, binom.v, static_cast<long>(j + 1), rnd);
        mpfr_mul(xpow.v, xpow.v, x.v, rnd);
        mpfr_mul(gpow.v, gpow.v, gamma.v, rnd);
    }
    return mpfr_get_d(sum.v, rnd);
}

double alt_sum_direct_naive(std::int64_t n0, const RiceConfig& cfg) {
    const double ga = std::pow(cfg.gamma, cfg.alpha);
    double binom = 1.0, xpow = 1.0, gpow = ga, sum = 0.0;
    for (std::int64_t j = 0; j <= n0; ++j) {
        const double denom = 1.0 - gpow;
        const double phi = cfg.variant == Variant::kSimple ? 1.0 / denom : gpow / (denom * denom);
        sum += (j & 1 ? -1.0 : 1.0) * binom * xpow * phi;
        if (j == n0) break;
        binom *= static_cast<double>(n0 - j) / static_cast<double>(j + 1);
        xpow *= cfg.x;
        gpow *= cfg.gamma;
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Complex special functions.

std::complex<double> log_gamma(std::complex<double> z) {
    // Lift small real parts via the recurrence log G(z) = log G(z+m) - sum log(z+j).
    std::complex<double> shift(0.0, 0.0);
    while (z.real() < 8.0) {
        shift += std::log(z);
        z += 1.0;
    }
    static const double lanczos[9] = {
        0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
        771.32342877765313,   -176.61502916214059,   12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    const std::complex<double> zm1 = z - 1.0;
    std::complex<double> acc(lanczos[0], 0.0);
    for (int i = 1; i < 9; ++i) acc += lanczos[i] / (zm1 + static_cast<double>(i));
    const std::complex<double> t = zm1 + 7.5;
    const std::complex<double> half_log_2pi(0.9189385332046727, 0.0);
    return half_log_2pi + (zm1 + 0.5) * std::log(t) - t + std::log(acc) - shift;
}

std::complex<double> digamma(std::complex<double> z) {
    std::complex<double> acc(0.0, 0.0);
    while (z.real() < 12.0) {
        acc -= 1.0 / z;
        z += 1.0;
    }
    // Asymptotic series with Bernoulli numbers B_2..B_14.
    static const double bern[7] = {1.0 / 6.0,  -1.0 / 30.0,    1.0 / 42.0, -1.0 / 30.0,
                                   5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0};
    const std::complex<double> inv = 1.0 / z;
    const std::complex<double> inv2 = inv * inv;
    std::complex<double> series = std::log(z) - 0.5 * inv;
    std::complex<double> p = inv2;
    for (int n = 1; n <= 7; ++n) {
        series -= bern[n - 1] / (2.0 * n) * p;
        p *= inv2;
    }
    return series + acc;
}

ResidueResult residue_series(double n0, const RiceConfig& cfg) {
    if (cfg.K < 1) throw std::domain_error("residue_series: K must be >= 1");
    if (!(n0 > 0.0)) throw std::domain_error("residue_series: n0 must be positive");
    const double log_gamma_real = std::log(cfg.gamma);  // negative
    const double logx = std::log(cfg.x);
    const double lg_n0p1 = std::lgamma(n0 + 1.0);

    ResidueResult out;
    double partial = 0.0;
    double last_mag = 0.0;
    for (int k = 0; k <= cfg.K; ++k) {
        const std::complex<double> zk(-cfg.alpha, 2.0 * M_PI * k / log_gamma_real);
        const std::complex<double> lg =
            lg_n0p1 + log_gamma(-zk) - log_gamma(n0 + 1.0 - zk) + zk * logx;
        std::complex<double> term = std::exp(lg);
        if (cfg.variant == Variant::kSquared)
            term *= logx + digamma(n0 + 1.0 - zk) - digamma(-zk);
        const double contrib = (k == 0) ? term.real() : 2.0 * term.real();
        partial += contrib;
        last_mag = std::abs(term);
        out.term_magnitude.push_back(last_mag);
    }
    const double scale = cfg.variant == Variant::kSimple
                             ? -1.0 / log_gamma_real
                             : 1.0 / (log_gamma_real * log_gamma_real);
    out.value = scale * partial;
    out.tail_term_ratio = std::fabs(partial) > 0.0 ? last_mag / std::fabs(partial) : 1.0;
    out.converged = out.tail_term_ratio <= 1e-14;
    const double norm = std::pow(n0, cfg.alpha);
    out.leading_constant = cfg.variant == Variant::kSimple ? out.value * norm
                                                           : out.value * norm / std::log(n0);
    return out;
}

std::vector<ProfileRow> scaling_profile(const RiceConfig& cfg, std::span<const double> n0_grid) {
    std::vector<ProfileRow> rows;
    rows.reserve(n0_grid.size());
    for (double n0 : n0_grid) {
        ProfileRow row;
        row.n0 = n0;
        row.value = alt_sum_geometric(n0, cfg);
        const double norm = std::pow(n0, cfg.alpha);
        row.normalized = cfg.variant == Variant::kSimple ? row.value * norm
                                                         : row.value * norm / std::log(n0);
        rows.push_back(row);
    }
    return rows;
}

double excursion_bound_f(double mu, double lambda) {
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double p_l = el / (el + eml), q_l = eml / (el + eml);
    const double big_r = 1.0 / (1.0 - 2.0 * q_l);
    const double radicand = 1.0 - 4.0 * p_l * q_l * std::exp(2.0 * mu);
    if (radicand < 0.0) throw std::domain_error("excursion_bound_f: mu beyond the real branch");
    return std::exp(-2.0 * mu * big_r) * (1.0 - std::sqrt(radicand)) /
           (2.0 * q_l * std::exp(mu));
}

double find_mu_hat(double lambda, double tol) {
    const double el = std::exp(lambda), eml = std::exp(-lambda);
    const double p_l = el / (el + eml), q_l = eml / (el + eml);
    const double mu_max = 0.5 * std::log(1.0 / (4.0 * p_l * q_l));
    const double target = 1.0 - tol;
    if (excursion_bound_f(mu_max, lambda) <= target) return mu_max;
    // Scan from the right for the largest admissible point, then bisect the
    // boundary of {f <= target} found there.
    const int grid = 400;
    double lo = -1.0, hi = -1.0;
    for (int i = grid - 1; i >= 1; --i) {
        const double mu = mu_max * static_cast<double>(i) / grid;
        if (excursion_bound_f(mu, lambda) <= target) {
            lo = mu;
            hi = mu_max * static_cast<double>(i + 1) / grid;
            break;
        }
    }
    if (lo < 0.0) throw std::runtime_error("find_mu_hat: no admissible mu (tolerance too tight)");
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (excursion_bound_f(mid, lambda) <= target) lo = mid;
        else hi = mid;
    }
    return lo;
}

}  // namespace ladderwalk::rice
