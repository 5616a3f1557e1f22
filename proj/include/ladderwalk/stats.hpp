// Small statistics toolbox: moments, quantiles, bootstrap, chi-square GoF,
// rank correlation, and log-log tail fits.
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ladderwalk/rng.hpp"

namespace ladderwalk::stats {

double mean(std::span<const double> xs);
double variance(std::span<const double> xs);  // unbiased (n-1)
double stddev(std::span<const double> xs);
double standard_error(std::span<const double> xs);

// Linear-interpolation quantile on a copy of the data, q in [0,1].
double quantile(std::span<const double> xs, double q);
double median(std::span<const double> xs);
double iqr(std::span<const double> xs);

// Percentile bootstrap CI for an arbitrary statistic of the sample.
struct BootstrapCi {
    double estimate = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double se = 0.0;
};
BootstrapCi bootstrap_ci(std::span<const double> xs,
                         const std::function<double(std::span<const double>)>& statistic,
                         int n_resamples, double level, Rng& rng);

// Regularized incomplete gamma functions P(a,x), Q(a,x) = 1 - P(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Upper-tail p-value of a chi-square statistic with df degrees of freedom.
double chi_square_pvalue(double statistic, int df);

// Pearson chi-square GoF of observed counts against expected counts (same length).
struct ChiSquareResult {
    double statistic = 0.0;
    int df = 0;
    double p_value = 0.0;
};
ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> expected);

double pearson_correlation(std::span<const double> xs, std::span<const double> ys);
double spearman_correlation(std::span<const double> xs, std::span<const double> ys);

// Ordinary least squares y ~ a + b x.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
};
LineFit fit_line(std::span<const double> xs, std::span<const double> ys);

// Total variation distance between two discrete distributions given as
// probability vectors over the same categories.
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace ladderwalk::stats
