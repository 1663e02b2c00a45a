// SPDX-License-Identifier: Apache-2.0
//
// Seedable random streams ("tdma-rng v1"): xoshiro256++ generators with
// splitmix64 state derivation. Every user index gets an independent stream,
// so sample sets are bit-reproducible across platforms and generation order.
#pragma once

#include <cstdint>

namespace tdma::rng {

inline constexpr const char* kGeneratorId = "xoshiro256++/splitmix64 v1";

struct SplitMix64 {
    std::uint64_t state;

    constexpr explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    constexpr std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

class Xoshiro256pp {
  public:
    explicit Xoshiro256pp(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : state_) w = sm.next();
    }

    std::uint64_t next() {
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

    // Uniform on the open interval (0, 1): (n + 1/2) / 2^53.
    double uniform_open() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

// Stream-splitting rule: user k draws from a xoshiro256++ generator seeded
// with splitmix64(seed XOR (k+1) * 0x9E3779B97F4A7C15).
inline Xoshiro256pp user_stream(std::uint64_t seed, std::size_t user) {
    SplitMix64 sm(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(user + 1)));
    return Xoshiro256pp(sm.next());
}

}  // namespace tdma::rng
