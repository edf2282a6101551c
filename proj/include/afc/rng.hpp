#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace afc {

/// splitmix64 step; used for seed derivation so that run seeds are
/// replayable from (master seed, training step, worker id) alone.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Hash a list of integers into one seed. Order-sensitive.
inline uint64_t derive_seed(std::initializer_list<uint64_t> parts) {
    uint64_t h = 0x2545f4914f6cdd1dULL;
    for (uint64_t p : parts) {
        h = splitmix64(h ^ splitmix64(p));
    }
    return h;
}

/// Deterministic RNG stream. mt19937_64 plus a hand-rolled Box-Muller so
/// normal draws do not depend on the standard library's unspecified
/// normal_distribution algorithm.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1).
    double uniform() {
        // 53-bit mantissa draw
        return (gen_() >> 11) * (1.0 / 9007199254740992.0);
    }

    /// Uniform integer in [0, n).
    uint64_t uniform_u64(uint64_t n) {
        // modulo bias negligible for n << 2^64; fine for shuffles
        return gen_() % n;
    }

    /// Standard normal via Box-Muller (cached pair).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace afc
