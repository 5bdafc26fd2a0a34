// Compiled with -ffast-math (this file only) so the Box-Muller loop vectorizes
// through the glibc vector math library. All inputs are in (0, 1), so the
// finite-math assumption cannot change results here. The sine half of each
// pair is written as a shifted cosine: GCC fuses sin/cos of the same argument
// into sincos, which has no vector variant.
#include <cmath>

#include "refctl/rng.hpp"

namespace refctl {

void philox_normals(std::uint64_t seed, std::uint32_t stream, std::uint64_t path, std::uint64_t block, double* out) {
    constexpr int kCounters = static_cast<int>(kNormalBlock / 4);
    alignas(64) std::uint32_t c0[kCounters], c1[kCounters], c2[kCounters], c3[kCounters];
    const std::uint64_t base = block * kCounters;
    const auto k0 = static_cast<std::uint32_t>(seed);
    const auto k1 = static_cast<std::uint32_t>(seed >> 32);
    const auto p_lo = static_cast<std::uint32_t>(path);
    const auto p_hi = (static_cast<std::uint32_t>(path >> 32) & 0xFFFFu) | (stream << 16);
    for (int i = 0; i < kCounters; ++i) {
        const std::uint64_t ctr = base + static_cast<std::uint64_t>(i);
        c0[i] = static_cast<std::uint32_t>(ctr);
        c1[i] = static_cast<std::uint32_t>(ctr >> 32);
        c2[i] = p_lo;
        c3[i] = p_hi;
    }
    std::uint32_t key0 = k0, key1 = k1;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key0 += 0x9E3779B9u;
            key1 += 0xBB67AE85u;
        }
#pragma omp simd
        for (int i = 0; i < kCounters; ++i) {
            const std::uint64_t q0 = std::uint64_t{0xD2511F53u} * c0[i];
            const std::uint64_t q1 = std::uint64_t{0xCD9E8D57u} * c2[i];
            const std::uint32_t n0 = static_cast<std::uint32_t>(q1 >> 32) ^ c1[i] ^ key0;
            const std::uint32_t n2 = static_cast<std::uint32_t>(q0 >> 32) ^ c3[i] ^ key1;
            c1[i] = static_cast<std::uint32_t>(q1);
            c3[i] = static_cast<std::uint32_t>(q0);
            c0[i] = n0;
            c2[i] = n2;
        }
    }
    // (c ^ 2^31) reinterpreted as signed is c - 2^31; this avoids an unsigned
    // conversion the vectorizer does not handle.
    constexpr double kScale = 2.3283064365386963e-10;  // 2^-32
    constexpr double kHalfRange = 2147483648.5;
    constexpr double kTwoPi = 6.283185307179586;
#pragma omp simd
    for (int i = 0; i < kCounters; ++i) {
        const double u0 = (static_cast<double>(static_cast<std::int32_t>(c0[i] ^ 0x80000000u)) + kHalfRange) * kScale;
        const double u1 = (static_cast<double>(static_cast<std::int32_t>(c1[i] ^ 0x80000000u)) + kHalfRange) * kScale;
        const double u2 = (static_cast<double>(static_cast<std::int32_t>(c2[i] ^ 0x80000000u)) + kHalfRange) * kScale;
        const double u3 = (static_cast<double>(static_cast<std::int32_t>(c3[i] ^ 0x80000000u)) + kHalfRange) * kScale;
        const double ra = std::sqrt(-2.0 * std::log(u0));
        const double rb = std::sqrt(-2.0 * std::log(u2));
        out[i] = ra * std::cos(kTwoPi * u1);
        out[kCounters + i] = ra * std::cos(kTwoPi * (u1 - 0.25));
        out[2 * kCounters + i] = rb * std::cos(kTwoPi * u3);
        out[3 * kCounters + i] = rb * std::cos(kTwoPi * (u3 - 0.25));
    }
}

}  // namespace refctl
