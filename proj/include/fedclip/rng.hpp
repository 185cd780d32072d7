#pragma once

#include <cmath>
#include <cstdint>

namespace fedclip {

/// What a random stream is used for. Distinct purposes get statistically
/// independent streams even for the same (client, round, iteration) key.
enum class DrawPurpose : std::uint64_t {
    kControl = 1,   // start-of-round control resampling (Algorithm line 3)
    kLocal = 2,     // per-iteration stochastic gradient noise
    kPartition = 3, // dataset partitioning shuffles
    kDataset = 4,   // synthetic dataset generation
    kDerive = 5,    // sub-seed derivation (grid cells, compare sub-runs)
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t absorb(std::uint64_t state, std::uint64_t field) {
    return mix64((state + kGolden) ^ field);
}

} // namespace detail

/// Counter-based random stream keyed by (seed, client, round, iteration, purpose).
///
/// Every draw is a pure function of the key and a per-stream counter, so the
/// sequence is identical regardless of thread count or evaluation order. Two
/// streams with different keys are independent.
class RngStream {
public:
    RngStream(std::uint64_t seed,
              std::uint64_t client,
              std::uint64_t round,
              std::uint64_t iteration,
              DrawPurpose purpose) {
        std::uint64_t k = detail::absorb(seed, 0x66656463ULL); // domain tag
        k = detail::absorb(k, client);
        k = detail::absorb(k, round);
        k = detail::absorb(k, iteration);
        key_ = detail::absorb(k, static_cast<std::uint64_t>(purpose));
    }

    std::uint64_t next_u64() {
        counter_ += detail::kGolden;
        return detail::mix64(key_ ^ counter_);
    }

    /// Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform in [-a, a).
    double uniform_symmetric(double a) { return a * (2.0 * uniform01() - 1.0); }

    /// Uniform integer in [0, n); rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    /// Standard normal via Box-Muller; consumes two draws.
    double gaussian() {
        const double u1 = 1.0 - uniform01(); // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

/// Derives an independent sub-seed, e.g. one per grid-search cell.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return detail::absorb(detail::absorb(master, 0x7375627365656473ULL), index);
}

} // namespace fedclip
