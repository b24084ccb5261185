// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deltascan
{
using Bytes = std::vector<std::uint8_t>;
using BytesView = std::span<const std::uint8_t>;
using Hash256 = std::array<std::uint8_t, 32>;

struct HexError : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

/// Lowercase hex without prefix.
std::string to_hex(BytesView bytes);

/// Accepts an optional "0x"/"0X" prefix and ignores ASCII whitespace.
/// Throws HexError on odd length or non-hex characters.
Bytes from_hex(std::string_view text);

/// True if the text looks like a hex string (after prefix/whitespace removal).
bool looks_like_hex(std::string_view text) noexcept;

/// Four-byte function selector, big-endian as it appears in calldata.
struct Selector
{
    std::uint32_t value = 0;

    static Selector from_bytes(BytesView four_bytes);

    /// "0x" followed by eight lowercase hex digits.
    std::string hex() const;

    /// Parses "0x1234abcd" or "1234abcd".
    static Selector parse(std::string_view text);

    auto operator<=>(const Selector&) const = default;
};

}  // namespace deltascan
