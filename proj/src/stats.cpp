#include "ladderwalk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ladderwalk::stats {

double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty sample");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("variance: need >= 2 points");
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return acc / static_cast<double>(xs.size() - 1);
}

double stddev(std::span<const double> xs) { return std::sqrt(variance(xs)); }

double standard_error(std::span<const double> xs) {
    return stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

double quantile(std::span<const double> xs, double q) {
    if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
    std::vector<double> s(xs.begin(), xs.end());
    std::sort(s.begin(), s.end());
    if (q <= 0.0) return s.front();
    if (q >= 1.0) return s.back();
    const double pos = q * static_cast<double>(s.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= s.size()) return s.back();
    return s[lo] * (1.0 - frac) + s[lo + 1] * frac;
}

double median(std::span<const double> xs) { return quantile(xs, 0.5); }

double iqr(std::span<const double> xs) { return quantile(xs, 0.75) - quantile(xs, 0.25); }

BootstrapCi bootstrap_ci(std::span<const double> xs,
                         const std::function<double(std::span<const double>)>& statistic,
                         int n_resamples, double level, Rng& rng) {
    if (xs.empty()) throw std::invalid_argument("bootstrap_ci: empty sample");
    BootstrapCi out;
    out.estimate = statistic(xs);
    std::vector<double> resample(xs.size());
    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(n_resamples));
    for (int b = 0; b < n_resamples; ++b) {
        for (auto& v : resample) v = xs[rng.below(xs.size())];
        stats.push_back(statistic(resample));
    }
    const double tail = (1.0 - level) / 2.0;
    out.lo = quantile(stats, tail);
    out.hi = quantile(stats, 1.0 - tail);
    out.se = stats.size() >= 2 ? stddev(stats) : 0.0;
    return out;
}

namespace {

double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 10000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    // Lentz's continued fraction for Q(a,x).
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::domain_error("gamma_p: invalid arguments");
    if (x == 0.0) return 0.0;
    return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_contfrac(a, x);
}

double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::domain_error("gamma_q: invalid arguments");
    if (x == 0.0) return 1.0;
    return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_contfrac(a, x);
}

double chi_square_pvalue(double statistic, int df) {
    if (df <= 0) throw std::domain_error("chi_square_pvalue: df must be positive");
    return gamma_q(0.5 * df, 0.5 * statistic);
}

ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> expected) {
    if (observed.size() != expected.size() || observed.empty())
        throw std::invalid_argument("chi_square_gof: size mismatch");
    ChiSquareResult r;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (expected[i] <= 0.0) throw std::invalid_argument("chi_square_gof: nonpositive expected count");
        const double d = observed[i] - expected[i];
        r.statistic += d * d / expected[i];
    }
    r.df = static_cast<int>(observed.size()) - 1;
    r.p_value = chi_square_pvalue(r.statistic, r.df);
    return r;
}

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("pearson_correlation: bad input");
    const double mx = mean(xs), my = mean(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> ranks(std::span<const double> xs) {
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> r(xs.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average rank for ties
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman_correlation(std::span<const double> xs, std::span<const double> ys) {
    const auto rx = ranks(xs);
    const auto ry = ranks(ys);
    return pearson_correlation(rx, ry);
}

LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("fit_line: bad input");
    const double mx = mean(xs), my = mean(ys);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate x");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("total_variation: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::fabs(p[i] - q[i]);
    return 0.5 * acc;
}

}  // namespace ladderwalk::stats
