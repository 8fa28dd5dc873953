#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace marlab {

inline std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ generator. Self-contained so that streams are bit-stable
/// across platforms and standard-library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        for (auto& w : state_) w = splitmix64(seed);
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

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    int uniform_int(int n) {
        // Rejection-free modulo bias is negligible for the small n used here,
        // but Lemire's method is just as cheap.
        return static_cast<int>((static_cast<__uint128_t>(next_u64()) *
                                 static_cast<__uint128_t>(n)) >> 64);
    }

    /// Standard normal via Marsaglia polar method.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Roles for derived streams. Every consumer of randomness in a run gets its
/// own stream keyed by (master seed, role, agent, episode), so reordering or
/// parallelising work across agents never changes any draw.
enum class StreamRole : std::uint64_t {
    EnvReset = 1,
    Planner = 2,
    Model = 3,
    Exchange = 4,
    Scenario = 5,
};

inline Rng derive_rng(std::uint64_t master, StreamRole role,
                      std::int64_t agent = -1, std::int64_t episode = -1) {
    std::uint64_t s = master;
    s ^= splitmix64(s) ^ (static_cast<std::uint64_t>(role) * 0x9e3779b97f4a7c15ULL);
    s ^= splitmix64(s) ^ (static_cast<std::uint64_t>(agent + 1) * 0xc2b2ae3d27d4eb4fULL);
    s ^= splitmix64(s) ^ (static_cast<std::uint64_t>(episode + 1) * 0x165667b19e3779f9ULL);
    return Rng(splitmix64(s));
}

}  // namespace marlab
