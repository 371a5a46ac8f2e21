// Deterministic random number generation for granusense.
//
// All stochastic code in the toolkit draws from this generator instead of
// <random> distributions, whose output is implementation-defined. Identical
// seeds therefore produce identical artifacts on every platform and build.
#pragma once

#include <cmath>
#include <cstdint>

namespace gsn {

// SplitMix64, used for seeding and for deriving per-item sub-seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Derive an independent stream seed from (seed, index) pairs. Used to give
// every image / run / grain scatter its own generator so work can be
// parallelized without changing results.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s ^= index * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL;
    std::uint64_t b = splitmix64(s);
    return a ^ (b + 0x9E3779B97F4A7C15ULL);
}

// xoshiro256++ by Blackman & Vigna, seeded through SplitMix64.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
        have_cached_normal_ = false;
        cached_normal_ = 0.0;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Box-Muller; the second variate is cached.
    double normal(double mean = 0.0, double sigma = 1.0) {
        if (have_cached_normal_) {
            have_cached_normal_ = false;
            return mean + sigma * cached_normal_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        cached_normal_ = r * std::sin(theta);
        have_cached_normal_ = true;
        return mean + sigma * r * std::cos(theta);
    }

    // Poisson by inversion; fine for the rates used here (lambda < ~500).
    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        const double u = uniform();
        double p = std::exp(-lambda);
        double cdf = p;
        int k = 0;
        const int cap = static_cast<int>(lambda + 20.0 * std::sqrt(lambda) + 100.0);
        while (u > cdf && k < cap) {
            ++k;
            p *= lambda / k;
            cdf += p;
        }
        return k;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
    bool have_cached_normal_;
    double cached_normal_;
};

} // namespace gsn
