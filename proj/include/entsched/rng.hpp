#pragma once

#include <cmath>
#include <cstdint>

namespace entsched {

/// splitmix64 step; used for seeding and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Stream tags for substream derivation. One master seed plus a
/// (tag, index) pair fully determines an independent stream.
enum class StreamTag : std::uint64_t {
    Preinfo = 1,
    Env = 2,
    Strategy = 3,
    ModelInit = 4,
    TrainEpisode = 5,
    BkRound1 = 6,
    BkRound2 = 7,
    BkBranchSample = 8,
    General = 9,
    Explore = 10,
    Validate = 11,
};

/// Derive a child seed from (seed, tag, index). Two splitmix64 absorptions,
/// one per component; documented so external tools can reproduce streams.
inline std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint64_t index) {
    std::uint64_t h = seed;
    h += 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(tag) + 1);
    h = splitmix64(h);
    h += 0x9E3779B97F4A7C15ull * (index + 1);
    h = splitmix64(h);
    return h;
}

/// xoshiro256++ generator, seeded through splitmix64 expansion.
/// All distributions are hand-rolled from the raw 64-bit output so the
/// produced streams are identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

    static Rng derived(std::uint64_t seed, StreamTag tag, std::uint64_t index) {
        return Rng(derive_seed(seed, tag, index));
    }

    void reseed(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_)
            word = splitmix64(sm);
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

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Gaussian via Box-Muller. Consumes exactly two uniforms per call
    /// (no cached spare), keeping the stream position predictable.
    double gaussian(double mean, double stddev) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300)
            u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Uniform integer in [0, n); n > 0. Rejection-free multiply-shift.
    std::uint64_t below(std::uint64_t n) {
        // 128-bit multiply keeps the modulo bias below 2^-64.
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool operator==(const Rng& other) const {
        return state_[0] == other.state_[0] && state_[1] == other.state_[1] &&
               state_[2] == other.state_[2] && state_[3] == other.state_[3];
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

} // namespace entsched
