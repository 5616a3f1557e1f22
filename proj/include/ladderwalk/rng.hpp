// Seeded, platform-stable RNG with independent substreams.
//
// Replica substreams are keyed by (seed, experiment id, replica index) through a
// splitmix64 chain, so results do not depend on scheduling or worker count.
#pragma once

#include <cstdint>
#include <initializer_list>

namespace ladderwalk {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// xoshiro256++ (Blackman & Vigna), seeded via splitmix64.
class Rng {
  public:
    Rng() : Rng(0x853c49e6748fea9bull) {}

    explicit Rng(std::uint64_t seed) { reseed({seed}); }

    Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
        std::uint64_t sm = seed;
        for (std::uint64_t k : key) sm = splitmix64(sm) ^ (k * 0x9e3779b97f4a7c15ull);
        reseed({sm});
    }

    // Substream keyed by arbitrary integers; order matters.
    static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
        return Rng(seed, {a, b, c});
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0,1), 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in (0,1]; safe as log() argument.
    double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t x, r;
        do {
            x = next_u64();
            r = x % n;
        } while (x - r > std::uint64_t(0) - n);
        return r;
    }

  private:
    void reseed(std::initializer_list<std::uint64_t> init) {
        std::uint64_t sm = *init.begin();
        for (auto& w : s_) w = splitmix64(sm);
        // xoshiro must not start from the all-zero state.
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x9e3779b97f4a7c15ull;
    }

    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
};

}  // namespace ladderwalk
