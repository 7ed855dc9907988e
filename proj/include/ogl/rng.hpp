#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>

namespace ogl {

// Deterministic random source.  The engine is std::mt19937_64 (its output
// sequence is pinned by the standard), but all real-valued transforms are
// spelled out here because the std distribution objects are free to differ
// between standard libraries, which would break byte-for-byte reproducibility
// of experiment reports.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1): 53 random mantissa bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        if (!(lo < hi)) throw std::invalid_argument("Rng::uniform: empty interval");
        return lo + (hi - lo) * uniform01();
    }

    // Standard normal via Box-Muller.  Uses exactly two engine draws per call
    // (no cached spare) so the stream position is easy to reason about.
    double normal() {
        // u1 in (0, 1] keeps the log finite.
        double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
        double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n); rejection sampling, so exactly unbiased.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        const std::uint64_t limit = (UINT64_MAX / n) * n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Fisher-Yates; together with below() this gives the same permutation on
    // every platform for a given seed.
    template <typename RandomIt>
    void shuffle(RandomIt first, RandomIt last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const std::uint64_t j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Stream for one trial of a multi-trial experiment: trial index folded into
// the master seed so trials are independent and reorderable.
inline std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial_index) {
    return master_seed ^ trial_index;
}

// Decorrelated sub-stream seed (train data vs. test data vs. fit randomness
// within one trial).  A single splitmix64 step; mt19937_64's own seeding then
// spreads the 64 bits over the full state.
inline std::uint64_t substream_seed(std::uint64_t base, std::uint64_t tag) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace ogl
