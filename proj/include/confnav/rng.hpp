#pragma once
// Seeded randomness: splitmix64 core plus a fixed (seed, stream) derivation
// scheme, so adding streams never perturbs draws from earlier ones.

#include <cmath>
#include <cstdint>

namespace confnav {

inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
}

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed + 0x9e3779b97f4a7c15ull * (stream + 1));
}

class Rng {
 public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static Rng derived(std::uint64_t seed, std::uint64_t stream) {
        return Rng(sub_seed(seed, stream));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix64(state_);
    }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform integer in [lo, hi], inclusive
    int next_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1ull;
        const auto wide = static_cast<unsigned __int128>(next_u64()) * span;
        return lo + static_cast<int>(wide >> 64);
    }

    double next_real(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    bool next_bernoulli(double p) { return next_double() < p; }

    // Box-Muller, one variate per call
    double next_gaussian() {
        double u1 = next_double();
        const double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

 private:
    std::uint64_t state_;
};

}  // namespace confnav
