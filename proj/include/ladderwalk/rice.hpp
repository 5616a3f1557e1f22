// Alternating binomial sums behind the annealed single-trap tail, evaluated by
// three routes:
//   - geometric: the all-positive series sum_k w_k gamma^{alpha k} (1 - x gamma^k)^{n0}
//     (production evaluator, double precision, no cancellation);
//   - direct: the alternating form sum_j C(n0,j)(-1)^j x^j/(1-gamma^{alpha+j})
//     in arbitrary precision (correctness oracle; the sum loses ~n0 bits);
//   - residue: the truncated bi-infinite Gamma-kernel series, exposing the
//     n0^{-alpha} scaling and its log-periodic leading constant.
#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace ladderwalk::rice {

enum class Variant { kSimple, kSquared };  // weights w_k = 1 or w_k = k

struct RiceConfig {
    double p = 0.5;
    double lambda = 0.0;
    double alpha = 0.0;   // lambda_c(p)/lambda
    double gamma = 0.0;   // e^{-2 lambda}
    std::int64_t t = 0;   // tilt: (p_l - q_l) gamma^{-t} <= 1 < (p_l - q_l) gamma^{-(t+1)}
    double x = 0.0;       // (p_l - q_l)/gamma^t
    Variant variant = Variant::kSimple;
    std::int64_t direct_cap = 10000;  // precision-budget cap for the direct route
    int K = 20;                       // residue truncation half-width
    double mu_hat = 0.0;              // largest mu with f(mu) <= 1 - tol (excursion bound)
};

RiceConfig make_rice_config(double p, double lambda, Variant variant = Variant::kSimple, int K = 20);

// Geometric-series route; n0 may be any nonnegative real.
double alt_sum_geometric(double n0, const RiceConfig& cfg);

// High-precision alternating route (MPFR, >= n0 log10(2) + 20 digits).
double alt_sum_direct(std::int64_t n0, const RiceConfig& cfg);

// The same alternating loop in plain double arithmetic; loses catastrophically
// for moderate n0 (kept as the cancellation demonstration).
double alt_sum_direct_naive(std::int64_t n0, const RiceConfig& cfg);

struct ResidueResult {
    double value = 0.0;
    double leading_constant = 0.0;  // value * n0^alpha (simple), * n0^alpha / log n0 (squared)
    bool converged = false;         // |k|=K term below 1e-14 of the partial sum
    double tail_term_ratio = 0.0;
    std::vector<double> term_magnitude;  // |term_k| for k = 0..K
};
ResidueResult residue_series(double n0, const RiceConfig& cfg);

struct ProfileRow {
    double n0 = 0.0;
    double value = 0.0;       // geometric route
    double normalized = 0.0;  // n0^alpha * value (simple), n0^alpha * value / log n0 (squared)
};
std::vector<ProfileRow> scaling_profile(const RiceConfig& cfg, std::span<const double> n0_grid);

// Excursion exponential-moment bound f(mu) = e^{-2 mu R} E[e^{mu sigma_1^Z}];
// f(0) = 1, f'(0) < 0.
double excursion_bound_f(double mu, double lambda);
// Largest bisection point mu in (0, log(1/(4 p_l q_l))/2] with f(mu) <= 1 - tol.
double find_mu_hat(double lambda, double tol = 1e-3);

// Complex special functions used by the residue route (exposed for tests).
// log_gamma is Lanczos-based; its imaginary part is defined up to 2 pi i,
// which cancels under exponentiation.
std::complex<double> log_gamma(std::complex<double> z);
std::complex<double> digamma(std::complex<double> z);

}  // namespace ladderwalk::rice
