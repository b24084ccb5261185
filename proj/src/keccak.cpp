// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <deltascan/keccak.hpp>

#include <bit>
#include <cstring>

namespace deltascan
{
namespace
{
constexpr std::uint64_t round_constants[24] = {0x0000000000000001, 0x0000000000008082,
    0x800000000000808a, 0x8000000080008000, 0x000000000000808b, 0x0000000080000001,
    0x8000000080008081, 0x8000000000008009, 0x000000000000008a, 0x0000000000000088,
    0x0000000080008009, 0x000000008000000a, 0x000000008000808b, 0x800000000000008b,
    0x8000000000008089, 0x8000000000008003, 0x8000000000008002, 0x8000000000000080,
    0x000000000000800a, 0x800000008000000a, 0x8000000080008081, 0x8000000000008080,
    0x0000000080000001, 0x8000000080008008};

// Lane visiting order of the combined rho/pi step and the matching rotations.
constexpr int pi_lanes[24] = {
    10, 7, 11, 17, 18, 3, 5, 16, 8, 21, 24, 4, 15, 23, 19, 13, 12, 2, 20, 14, 22, 9, 6, 1};
constexpr int rho_rotations[24] = {
    1, 3, 6, 10, 15, 21, 28, 36, 45, 55, 2, 14, 27, 41, 56, 8, 25, 43, 62, 18, 39, 61, 20, 44};

void keccak_f1600(std::uint64_t (&a)[25]) noexcept
{
    for (const auto rc : round_constants)
    {
        std::uint64_t c[5];
        for (int x = 0; x < 5; ++x)
            c[x] = a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20];
        for (int x = 0; x < 5; ++x)
        {
            const auto d = c[(x + 4) % 5] ^ std::rotl(c[(x + 1) % 5], 1);
            for (int y = 0; y < 25; y += 5)
                a[y + x] ^= d;
        }

        auto carry = a[1];
        for (int i = 0; i < 24; ++i)
        {
            const auto j = pi_lanes[i];
            const auto tmp = a[j];
            a[j] = std::rotl(carry, rho_rotations[i]);
            carry = tmp;
        }

        for (int y = 0; y < 25; y += 5)
        {
            std::uint64_t row[5];
            for (int x = 0; x < 5; ++x)
                row[x] = a[y + x];
            for (int x = 0; x < 5; ++x)
                a[y + x] = row[x] ^ (~row[(x + 1) % 5] & row[(x + 2) % 5]);
        }

        a[0] ^= rc;
    }
}

std::uint64_t load_le64(const std::uint8_t* p) noexcept
{
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
        v = (v << 8) | p[i];
    return v;
}
}  // namespace

Hash256 keccak256(BytesView data) noexcept
{
    constexpr std::size_t rate = 136;
    std::uint64_t state[25] = {};

    auto absorb = [&state](const std::uint8_t* block) noexcept {
        for (std::size_t i = 0; i < rate / 8; ++i)
            state[i] ^= load_le64(block + 8 * i);
        keccak_f1600(state);
    };

    std::size_t pos = 0;
    for (; pos + rate <= data.size(); pos += rate)
        absorb(data.data() + pos);

    std::uint8_t last[rate] = {};
    const auto tail = data.size() - pos;
    if (tail != 0)
        std::memcpy(last, data.data() + pos, tail);
    last[tail] ^= 0x01;
    last[rate - 1] ^= 0x80;
    absorb(last);

    Hash256 out;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t b = 0; b < 8; ++b)
            out[8 * i + b] = static_cast<std::uint8_t>(state[i] >> (8 * b));
    return out;
}

}  // namespace deltascan
