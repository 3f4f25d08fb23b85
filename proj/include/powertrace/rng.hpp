#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace powertrace {

// Every random operation in the library takes an explicit 64-bit seed.
// Sub-streams are derived with a splitmix64 hash chain so that e.g.
// (seed, server 3, lifetime sampling) names one reproducible stream
// regardless of evaluation order or thread count.

namespace streams {
inline constexpr std::uint64_t kArrivals = 1;
inline constexpr std::uint64_t kLengths = 2;
inline constexpr std::uint64_t kLifetimes = 3;
inline constexpr std::uint64_t kTrajectory = 4;
inline constexpr std::uint64_t kPower = 5;
inline constexpr std::uint64_t kOffsets = 6;
inline constexpr std::uint64_t kThinning = 7;
inline constexpr std::uint64_t kInit = 8;
inline constexpr std::uint64_t kShuffle = 9;
inline constexpr std::uint64_t kRestart = 10;
inline constexpr std::uint64_t kServer = 11;
inline constexpr std::uint64_t kRack = 12;
inline constexpr std::uint64_t kSplit = 13;
} // namespace streams

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> path) {
    std::uint64_t state = seed;
    std::uint64_t out = splitmix64_next(state);
    for (std::uint64_t tag : path) {
        state ^= tag * 0xd1342543de82ef95ULL;
        out = splitmix64_next(state);
    }
    return out;
}

// mt19937_64 engine with hand-rolled transforms. The standard engine has a
// fully specified output sequence; the standard *distributions* do not, and
// some implementations cache draws. Rolling our own keeps generated traces
// reproducible across toolchains and pins the draw protocol (exactly one
// normal() per power sample) that the AR(1)/i.i.d. equivalence relies on.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // 53-bit uniform in [0, 1)
    double uniform01() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller, no caching: exactly two engine
    // outputs per call.
    double normal() {
        double u1 = static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53; // (0, 1]
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double exponential(double rate) {
        double u = uniform01();
        return -std::log1p(-u) / rate;
    }

    // Categorical draw by inverse CDF walk; one uniform per call.
    // Weights need not be normalized.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform01() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 eng_;
};

} // namespace powertrace
