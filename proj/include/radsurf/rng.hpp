#pragma once

// Counter-based random numbers (Philox4x32-10). Streams are addressed by
// logical ids (iteration, surfel, sample slot), so any draw can be reproduced
// in isolation regardless of evaluation order or thread count.

#include <array>
#include <cstdint>

#include "radsurf/core.hpp"

namespace radsurf {

namespace detail {

inline void philox_mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
    uint64_t p = static_cast<uint64_t>(a) * b;
    hi = static_cast<uint32_t>(p >> 32);
    lo = static_cast<uint32_t>(p);
}

inline std::array<uint32_t, 4> philox4x32_10(std::array<uint32_t, 4> ctr,
                                             std::array<uint32_t, 2> key) {
    constexpr uint32_t kMul0 = 0xD2511F53u;
    constexpr uint32_t kMul1 = 0xCD9E8D57u;
    constexpr uint32_t kW0 = 0x9E3779B9u;
    constexpr uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        uint32_t hi0, lo0, hi1, lo1;
        philox_mulhilo(kMul0, ctr[0], hi0, lo0);
        philox_mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace detail

// One logical random stream. Equal (seed, a, b, c) always yields the same
// sequence; distinct ids yield statistically independent sequences.
class Rng {
  public:
    Rng(uint64_t seed, uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
        uint64_t k = detail::splitmix64(seed);
        // Chain a full mix per id component; linear combinations of small ids
        // collide structurally (e.g. b ^ shifted c), full mixes do not.
        uint64_t s = detail::splitmix64(detail::splitmix64(detail::splitmix64(a) + b) + c);
        key_ = {static_cast<uint32_t>(k), static_cast<uint32_t>(k >> 32)};
        stream_ = {static_cast<uint32_t>(s), static_cast<uint32_t>(s >> 32)};
    }

    // Uniform in [0, 1), 53-bit mantissa.
    double uniform() {
        uint64_t bits = next64();
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be > 0.
    uint64_t uniform_index(uint64_t n) {
        // Multiply-shift; bias is negligible for n << 2^64.
        unsigned __int128 wide = static_cast<unsigned __int128>(next64()) * n;
        return static_cast<uint64_t>(wide >> 64);
    }

    // Uniform direction over the unit hemisphere around unit normal n.
    Vec3 uniform_hemisphere(const Vec3& n) {
        double u1 = uniform();
        double u2 = uniform();
        double z = u1;
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        double phi = kTwoPi * u2;
        Vec3 b1, b2;
        build_onb(n, b1, b2);
        return normalize(r * std::cos(phi) * b1 + r * std::sin(phi) * b2 + z * n);
    }

    // Cosine-weighted direction over the unit hemisphere; pdf = cos(theta)/pi.
    Vec3 cosine_hemisphere(const Vec3& n) {
        double u1 = uniform();
        double u2 = uniform();
        double z = std::sqrt(std::max(0.0, 1.0 - u1));
        double r = std::sqrt(u1);
        double phi = kTwoPi * u2;
        Vec3 b1, b2;
        build_onb(n, b1, b2);
        return normalize(r * std::cos(phi) * b1 + r * std::sin(phi) * b2 + z * n);
    }

    Vec3 uniform_sphere() {
        double u1 = uniform();
        double u2 = uniform();
        double z = 1.0 - 2.0 * u1;
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        double phi = kTwoPi * u2;
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

    uint64_t next64() {
        if (phase_ == 0) {
            block_ = detail::philox4x32_10({static_cast<uint32_t>(draw_),
                                            static_cast<uint32_t>(draw_ >> 32), stream_[0],
                                            stream_[1]},
                                           key_);
            ++draw_;
            phase_ = 1;
            return (static_cast<uint64_t>(block_[0]) << 32) | block_[1];
        }
        phase_ = 0;
        return (static_cast<uint64_t>(block_[2]) << 32) | block_[3];
    }

  private:
    std::array<uint32_t, 2> key_{};
    std::array<uint32_t, 2> stream_{};
    uint64_t draw_ = 0;
    std::array<uint32_t, 4> block_{};
    int phase_ = 0;
};

}  // namespace radsurf
