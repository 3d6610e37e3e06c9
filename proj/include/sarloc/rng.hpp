#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace sarloc {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive an independent seed for a named sub-stream.
inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
    return splitmix64(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
}

// mt19937_64 engine (its sequence is fixed by the standard) with hand-rolled
// transforms, so draws are identical across standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t bits() { return eng_(); }

    // [0, 1)
    double unit() { return double(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // inclusive [lo, hi], unbiased (Lemire bounded draw)
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t range = uint64_t(hi - lo) + 1;
        if (range == 0) return int64_t(eng_()); // full 64-bit range
        unsigned __int128 m = (unsigned __int128)eng_() * range;
        auto l = uint64_t(m);
        if (l < range) {
            uint64_t t = (-range) % range;
            while (l < t) {
                m = (unsigned __int128)eng_() * range;
                l = uint64_t(m);
            }
        }
        return lo + int64_t(m >> 64);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller; the sine branch is discarded to keep state engine-only.
        double u1 = std::max(1.0 - unit(), 1e-300); // (0, 1]
        double u2 = unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
    }

    double exponential() { return -std::log(std::max(1.0 - unit(), 1e-300)); }

    // Zero-mean Laplace with scale b (variance 2 b^2).
    double laplace(double b) {
        double p = std::clamp(unit(), 1e-300, 1.0 - 1e-16);
        return p < 0.5 ? b * std::log(2.0 * p) : -b * std::log(2.0 * (1.0 - p));
    }

    // Mean of `looks` unit exponentials: mean 1, variance 1/looks.
    double multilook_factor(int looks) {
        double s = 0.0;
        for (int i = 0; i < looks; ++i) s += exponential();
        return s / looks;
    }

    template <typename It>
    void shuffle(It first, It last) {
        auto n = last - first;
        for (auto i = n - 1; i > 0; --i) {
            auto j = uniform_int(0, i);
            std::swap(first[i], first[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

} // namespace sarloc
