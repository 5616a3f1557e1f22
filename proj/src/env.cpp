#include "ladderwalk/env.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ladderwalk {

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::kCycleStationary: return "cycle_stationary";
        case Provenance::kWindowRejection: return "window_rejection";
        case Provenance::kHandcrafted: return "handcrafted";
    }
    return "handcrafted";
}

Provenance provenance_from_name(const std::string& name) {
    if (name == "cycle_stationary") return Provenance::kCycleStationary;
    if (name == "window_rejection") return Provenance::kWindowRejection;
    if (name == "handcrafted") return Provenance::kHandcrafted;
    throw std::invalid_argument("unknown provenance: " + name);
}

// ---------------------------------------------------------------------------
// Connectivity (BFS over open edges; exact, detours included).

namespace {

std::vector<std::uint8_t> bfs_from_boundary(const Environment& env, bool from_left) {
    const std::size_t n = env.cols.size();
    std::vector<std::uint8_t> mark(n, 0);
    std::vector<std::uint32_t> stack;
    const std::size_t seed = from_left ? 0 : n - 1;
    for (int y = 0; y < 2; ++y) {
        mark[seed] |= std::uint8_t(1) << y;
        stack.push_back(static_cast<std::uint32_t>((seed << 1) | static_cast<unsigned>(y)));
    }
    auto visit = [&](std::size_t i, int y) {
        const std::uint8_t bit = std::uint8_t(1) << y;
        if (!(mark[i] & bit)) {
            mark[i] |= bit;
            stack.push_back(static_cast<std::uint32_t>((i << 1) | static_cast<unsigned>(y)));
        }
    };
    while (!stack.empty()) {
        const std::uint32_t node = stack.back();
        stack.pop_back();
        const std::size_t i = node >> 1;
        const int y = static_cast<int>(node & 1);
        const std::uint8_t hbit = y ? kTopBit : kBottomBit;
        if (i + 1 < n && (env.cols[i] & hbit)) visit(i + 1, y);
        if (i > 0 && (env.cols[i - 1] & hbit)) visit(i - 1, y);
        if (env.cols[i] & kVertBit) visit(i, 1 - y);
    }
    return mark;
}

}  // namespace

ReachSets reach_sets(const Environment& env) {
    return ReachSets{bfs_from_boundary(env, true), bfs_from_boundary(env, false)};
}

bool has_crossing(const Environment& env) {
    const auto left = bfs_from_boundary(env, true);
    return left.back() != 0;
}

bool vertex_in_cluster(const Environment& env, std::int64_t x, int y) {
    const auto r = reach_sets(env);
    const std::size_t i = static_cast<std::size_t>(x - env.x_lo);
    const std::uint8_t bit = std::uint8_t(1) << y;
    return (r.left[i] & bit) && (r.right[i] & bit);
}

// ---------------------------------------------------------------------------
// Column chain.

int column_chain_step(int state, std::uint8_t col) {
    std::uint8_t set = state == kStateTop ? 2 : state == kStateBottom ? 1 : 3;
    if ((col & kVertBit) && set) set = 3;
    std::uint8_t out = 0;
    if ((set & 2) && (col & kTopBit)) out |= 2;
    if ((set & 1) && (col & kBottomBit)) out |= 1;
    if (out == 0) return -1;
    if (out == 3) return kStateBoth;
    return out == 2 ? kStateTop : kStateBottom;
}

ColumnChain build_column_chain(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("build_column_chain: p must be in (0,1)");
    ColumnChain chain;
    chain.p = p;

    double col_prob[8];
    for (int c = 0; c < 8; ++c) {
        int bits = ((c & 1) != 0) + ((c & 2) != 0) + ((c & 4) != 0);
        col_prob[c] = std::pow(p, bits) * std::pow(1.0 - p, 3 - bits);
    }
    double kernel[3][3] = {};
    for (int s = 0; s < 3; ++s)
        for (int c = 0; c < 8; ++c) {
            const int nx = column_chain_step(s, static_cast<std::uint8_t>(c));
            chain.next[s][c] = nx;
            if (nx >= 0) kernel[s][nx] += col_prob[c];
        }

    // Perron root and right eigenvector by power iteration.
    double h[3] = {1.0, 1.0, 1.0};
    double rho = 0.0;
    for (int it = 0; it < 100000; ++it) {
        double nh[3];
        for (int s = 0; s < 3; ++s)
            nh[s] = kernel[s][0] * h[0] + kernel[s][1] * h[1] + kernel[s][2] * h[2];
        const double scale = nh[kStateBoth];
        double diff = 0.0;
        for (int s = 0; s < 3; ++s) {
            nh[s] /= scale;
            diff = std::max(diff, std::fabs(nh[s] - h[s]));
            h[s] = nh[s];
        }
        rho = scale;  // since h[kStateBoth] stays normalized to 1
        if (diff < 1e-15 && it > 8) break;
    }
    chain.perron_root = rho;
    for (int s = 0; s < 3; ++s) chain.h[s] = h[s];

    for (int s = 0; s < 3; ++s) {
        double cdf = 0.0;
        for (int c = 0; c < 8; ++c) {
            const int nx = chain.next[s][c];
            chain.doob[s][c] = nx >= 0 ? col_prob[c] * chain.h[nx] / (rho * chain.h[s]) : 0.0;
            cdf += chain.doob[s][c];
            chain.doob_cdf[s][c] = cdf;
        }
        if (std::fabs(cdf - 1.0) > 1e-12)
            throw std::runtime_error("build_column_chain: Doob row does not normalize");
        chain.doob_cdf[s][7] = 1.0;
    }
    return chain;
}

namespace {

inline std::uint8_t sample_doob_column(const ColumnChain& chain, int state, Rng& rng) {
    const double u = rng.uniform();
    const double* cdf = chain.doob_cdf[state];
    for (int c = 0; c < 8; ++c)
        if (u < cdf[c]) return static_cast<std::uint8_t>(c);
    return 7;
}

}  // namespace

Cycle sample_cycle(const ColumnChain& chain, Rng& rng, std::int64_t max_columns) {
    Cycle cycle;
    cycle.cols.push_back(kPatternCol);
    int state = kStateBottom;  // post-pattern state
    for (std::int64_t x = 1; x <= max_columns; ++x) {
        const std::uint8_t c = sample_doob_column(chain, state, rng);
        const bool prev_top_closed = (cycle.cols.back() & kTopBit) == 0;
        if (state == kStateBottom && prev_top_closed && c == kPatternCol) {
            return cycle;  // boundary at x; its pattern column opens the next cycle
        }
        cycle.cols.push_back(c);
        state = chain.next[state][c];
    }
    throw HorizonError("sample_cycle: no pre-regeneration pattern within " +
                       std::to_string(max_columns) + " columns");
}

namespace {

// Appends one cycle at the right boundary. Requires env to end exactly at a
// boundary whose pattern column is the last stored column.
void append_cycle(Environment& env, const Cycle& cycle) {
    const std::int64_t boundary = env.x_hi();
    env.cols.pop_back();  // the boundary pattern column is cycle.cols[0]
    env.cols.insert(env.cols.end(), cycle.cols.begin(), cycle.cols.end());
    env.cols.push_back(kPatternCol);  // next boundary's pattern column
    env.cycle_boundaries.push_back(boundary + cycle.length());
}

}  // namespace

Environment sample_environment(const ColumnChain& chain, Rng& rng, std::int64_t min_x_hi,
                               int left_margin_cycles) {
    Environment env;
    env.p = chain.p;
    env.provenance = Provenance::kCycleStationary;
    env.x_lo = 0;
    env.cols.push_back(kPatternCol);
    env.cycle_boundaries.push_back(0);
    while (env.x_hi() < std::max<std::int64_t>(min_x_hi, 1)) append_cycle(env, sample_cycle(chain, rng));
    for (int i = 0; i < left_margin_cycles; ++i) {
        const Cycle c = sample_cycle(chain, rng);
        env.cols.insert(env.cols.begin(), c.cols.begin(), c.cols.end());
        env.x_lo -= c.length();
    }
    return env;
}

void extend_right_cycles(Environment& env, const ColumnChain& chain, Rng& rng, std::int64_t target_x_hi) {
    while (env.x_hi() < target_x_hi) append_cycle(env, sample_cycle(chain, rng));
}

void extend_left_cycles(Environment& env, const ColumnChain& chain, Rng& rng, std::int64_t target_x_lo) {
    while (env.x_lo > target_x_lo) {
        const Cycle c = sample_cycle(chain, rng);
        env.cols.insert(env.cols.begin(), c.cols.begin(), c.cols.end());
        env.x_lo -= c.length();
    }
}

// ---------------------------------------------------------------------------
// Window rejection.

WindowRejectionResult sample_window_rejection(double p, std::int64_t N, Rng& rng,
                                              std::int64_t max_attempts) {
    if (N < 2) throw std::domain_error("sample_window_rejection: N must be >= 2");
    WindowRejectionResult out;
    out.env.p = p;
    out.env.provenance = Provenance::kWindowRejection;
    out.env.x_lo = -N;
    const std::size_t n = static_cast<std::size_t>(2 * N + 1);
    out.env.cols.resize(n);
    const std::size_t origin = static_cast<std::size_t>(N);
    for (out.attempts = 1; out.attempts <= max_attempts; ++out.attempts) {
        for (auto& c : out.env.cols) {
            std::uint8_t bits = 0;
            if (rng.uniform() < p) bits |= kTopBit;
            if (rng.uniform() < p) bits |= kBottomBit;
            if (rng.uniform() < p) bits |= kVertBit;
            c = bits;
        }
        const auto r = reach_sets(out.env);
        if ((r.left[origin] & 1) && (r.right[origin] & 1))
            return out;  // (0,0) joined to both boundaries implies a crossing through it
    }
    throw BudgetError("sample_window_rejection: no acceptance within " +
                      std::to_string(max_attempts) + " attempts");
}

// ---------------------------------------------------------------------------
// Pre-regeneration points.

std::vector<std::int64_t> find_pre_regeneration_points(const Environment& env) {
    if (env.cols.size() < 2)
        throw MarginError("find_pre_regeneration_points: window needs at least two columns");
    const auto r = reach_sets(env);
    std::vector<std::int64_t> points;
    for (std::int64_t x = env.x_lo + 1; x <= env.x_hi(); ++x) {
        const std::size_t i = static_cast<std::size_t>(x - env.x_lo);
        const std::uint8_t prev = env.cols[i - 1];
        const std::uint8_t cur = env.cols[i];
        if (prev & kTopBit) continue;
        if (cur & (kTopBit | kVertBit)) continue;
        if (!(r.left[i] & 1) || !(r.right[i] & 1)) continue;
        points.push_back(x);
    }
    return points;
}

// ---------------------------------------------------------------------------
// Text format.

void write_env_text(const Environment& env, std::ostream& os) {
    char head[160];
    std::snprintf(head, sizeof head, "ladderenv v1 p=%.17g x_lo=%lld x_hi=%lld provenance=%s\n",
                  env.p, static_cast<long long>(env.x_lo), static_cast<long long>(env.x_hi()),
                  provenance_name(env.provenance));
    os << head;
    for (std::int64_t x = env.x_lo; x <= env.x_hi(); ++x) {
        const std::uint8_t c = env.cols[static_cast<std::size_t>(x - env.x_lo)];
        os << x << ' ' << ((c & kTopBit) ? 1 : 0) << ' ' << ((c & kBottomBit) ? 1 : 0) << ' '
           << ((c & kVertBit) ? 1 : 0) << '\n';
    }
}

Environment read_env_text(std::istream& is) {
    std::string tag, version;
    is >> tag >> version;
    if (tag != "ladderenv" || version != "v1")
        throw std::runtime_error("read_env_text: not a ladderenv v1 file");
    Environment env;
    std::int64_t x_hi = 0;
    std::string field;
    for (int i = 0; i < 4; ++i) {
        is >> field;
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw std::runtime_error("read_env_text: malformed header");
        const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
        if (key == "p") env.p = std::stod(value);
        else if (key == "x_lo") env.x_lo = std::stoll(value);
        else if (key == "x_hi") x_hi = std::stoll(value);
        else if (key == "provenance") env.provenance = provenance_from_name(value);
        else throw std::runtime_error("read_env_text: unknown header field " + key);
    }
    const std::int64_t n = x_hi - env.x_lo + 1;
    if (n <= 0) throw std::runtime_error("read_env_text: empty window");
    env.cols.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t x;
        int t, b, v;
        if (!(is >> x >> t >> b >> v)) throw std::runtime_error("read_env_text: truncated column list");
        if (x != env.x_lo + i) throw std::runtime_error("read_env_text: levels out of order");
        env.cols[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>((t ? kTopBit : 0) | (b ? kBottomBit : 0) | (v ? kVertBit : 0));
    }
    if (env.provenance == Provenance::kCycleStationary) {
        for (std::int64_t x : find_pre_regeneration_points(env))
            if (x >= 0) env.cycle_boundaries.push_back(x);
        if (env.x_lo <= 0) {
            // level 0 is a boundary by construction but only detectable with a left margin
            if (env.cycle_boundaries.empty() || env.cycle_boundaries.front() != 0)
                env.cycle_boundaries.insert(env.cycle_boundaries.begin(), 0);
        }
    }
    return env;
}

}  // namespace ladderwalk
