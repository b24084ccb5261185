// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <deltascan/bytes.hpp>

#include <cctype>

namespace deltascan
{
namespace
{
int hex_digit(char c) noexcept
{
    if (c >= '0' && c <= '9')
        return c - '0';
    if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
    if (c >= 'A' && c <= 'F')
        return c - 'A' + 10;
    return -1;
}

std::string_view strip_prefix(std::string_view text) noexcept
{
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
        text.remove_prefix(1);
    if (text.size() >= 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X'))
        text.remove_prefix(2);
    return text;
}
}  // namespace

std::string to_hex(BytesView bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (const auto b : bytes)
    {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

Bytes from_hex(std::string_view text)
{
    text = strip_prefix(text);
    Bytes out;
    out.reserve(text.size() / 2);
    int pending = -1;
    for (const char c : text)
    {
        if (std::isspace(static_cast<unsigned char>(c)))
            continue;
        const int d = hex_digit(c);
        if (d < 0)
            throw HexError{std::string{"invalid hex character '"} + c + "'"};
        if (pending < 0)
            pending = d;
        else
        {
            out.push_back(static_cast<std::uint8_t>((pending << 4) | d));
            pending = -1;
        }
    }
    if (pending >= 0)
        throw HexError{"odd number of hex digits"};
    return out;
}

bool looks_like_hex(std::string_view text) noexcept
{
    text = strip_prefix(text);
    std::size_t digits = 0;
    for (const char c : text)
    {
        if (std::isspace(static_cast<unsigned char>(c)))
            continue;
        if (hex_digit(c) < 0)
            return false;
        ++digits;
    }
    return digits % 2 == 0;
}

Selector Selector::from_bytes(BytesView four_bytes)
{
    if (four_bytes.size() != 4)
        throw std::invalid_argument{"selector needs exactly 4 bytes"};
    return {(std::uint32_t{four_bytes[0]} << 24) | (std::uint32_t{four_bytes[1]} << 16) |
            (std::uint32_t{four_bytes[2]} << 8) | std::uint32_t{four_bytes[3]}};
}

std::string Selector::hex() const
{
    const std::array<std::uint8_t, 4> b{static_cast<std::uint8_t>(value >> 24),
        static_cast<std::uint8_t>(value >> 16), static_cast<std::uint8_t>(value >> 8),
        static_cast<std::uint8_t>(value)};
    return "0x" + to_hex(b);
}

Selector Selector::parse(std::string_view text)
{
    const auto bytes = from_hex(text);
    return from_bytes(bytes);
}

}  // namespace deltascan
