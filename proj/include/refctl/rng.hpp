#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace refctl {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter generate(Counter c, Key k) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                k[0] += 0x9E3779B9u;
                k[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
            c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
        }
        return c;
    }
};

/// Number of normals produced per (path, block) unit.
inline constexpr std::size_t kNormalBlock = 256;

/// Fills out[0..255] with standard normals for one path stream and one block
/// of 256 consecutive steps. The draws depend only on (seed, stream, path,
/// block), never on the caller, so results are reproducible under any
/// partitioning of paths across threads.
///
/// Counter layout: c0 = low bits of block*64 + i, c1 = high bits, c2 = low 32
/// bits of path, c3 = bits 32..47 of path | stream << 16; key = seed.
void philox_normals(std::uint64_t seed, std::uint32_t stream, std::uint64_t path, std::uint64_t block, double* out);

}  // namespace refctl
