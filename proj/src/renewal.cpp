#include "ladderwalk/renewal.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "ladderwalk/stats.hpp"

namespace ladderwalk::renewal {

double RenewalSpec::a(double t) const {
    if (misnormalized) return std::sqrt(t);
    if (alpha == 2.0) return std::sqrt(t * std::log(t));
    return std::pow(t, 1.0 / alpha);
}

double RenewalSpec::draw_increment(Rng& rng, bool first) const {
    if (kind == IncrementKind::kDeterministic) return mu;
    const double u = rng.uniform_pos();
    if (first && heavy_first) return x_m * std::pow(u, -1.0 / first_alpha);
    return x_m * std::pow(u, -1.0 / alpha);
}

RenewalSpec make_renewal_spec(double alpha, double d, IncrementKind kind) {
    if (!(alpha > 1.0 && alpha <= 2.0))
        throw std::domain_error("make_renewal_spec: alpha must be in (1,2]");
    if (!(d > 0.0)) throw std::domain_error("make_renewal_spec: d must be positive");
    RenewalSpec spec;
    spec.alpha = alpha;
    spec.d = d;
    spec.x_m = std::pow(d, 1.0 / alpha);
    spec.mu = kind == IncrementKind::kDeterministic ? 1.0 : alpha * spec.x_m / (alpha - 1.0);
    spec.kind = kind;
    return spec;
}

std::int64_t simulate_first_passage(const RenewalSpec& spec, double t, Rng& rng) {
    if (t < 0.0) throw std::domain_error("simulate_first_passage: t must be >= 0");
    double s = 0.0;
    std::int64_t n = 0;
    while (s <= t) {
        s += spec.draw_increment(rng, n == 0);
        ++n;
    }
    return n;
}

std::vector<UiProfileRow> ui_profile(const RenewalSpec& spec, std::span<const double> t_grid,
                                     double theta, double p_neg, int replicas, std::uint64_t seed,
                                     int workers) {
    if (t_grid.empty()) throw std::invalid_argument("ui_profile: empty grid");
    if (replicas < 2) throw std::invalid_argument("ui_profile: need >= 2 replicas");
    const std::size_t nt = t_grid.size();
    // exp_stat[j][r], neg_stat[j][r]
    std::vector<std::vector<double>> exp_stat(nt, std::vector<double>(replicas));
    std::vector<std::vector<double>> neg_stat(nt, std::vector<double>(replicas));

    std::atomic<int> next{0};
    auto worker_fn = [&]() {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= replicas) return;
            for (std::size_t j = 0; j < nt; ++j) {
                // Common random numbers: replay the replica substream per t.
                Rng rng = Rng::substream(seed, 0x52454e57ull, static_cast<std::uint64_t>(r));
                const double t = t_grid[j];
                const double nu = static_cast<double>(simulate_first_passage(spec, t, rng));
                const double z = (nu - t / spec.mu) / spec.a(t);
                exp_stat[j][static_cast<std::size_t>(r)] = std::exp(theta * z);
                neg_stat[j][static_cast<std::size_t>(r)] =
                    z < 0.0 ? std::pow(-z, p_neg) : 0.0;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < std::max(1, workers); ++w) pool.emplace_back(worker_fn);
    for (auto& th : pool) th.join();

    std::vector<UiProfileRow> rows(nt);
    for (std::size_t j = 0; j < nt; ++j) {
        Rng boot = Rng::substream(seed, 0x424f4f54ull, j);
        rows[j].t = t_grid[j];
        const auto mean_stat = [](std::span<const double> xs) { return stats::mean(xs); };
        const auto e = stats::bootstrap_ci(exp_stat[j], mean_stat, 200, 0.95, boot);
        rows[j].exp_moment = e.estimate;
        rows[j].exp_lo = e.lo;
        rows[j].exp_hi = e.hi;
        const auto n = stats::bootstrap_ci(neg_stat[j], mean_stat, 200, 0.95, boot);
        rows[j].neg_moment = n.estimate;
        rows[j].neg_lo = n.lo;
        rows[j].neg_hi = n.hi;
    }
    return rows;
}

}  // namespace ladderwalk::renewal
