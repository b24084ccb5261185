// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deltascan/bytes.hpp>

#include <string_view>

namespace deltascan
{
/// Keccak-256 as used by Ethereum (original padding 0x01, not SHA3's 0x06).
Hash256 keccak256(BytesView data) noexcept;

inline Hash256 keccak256(std::string_view text) noexcept
{
    return keccak256(BytesView{reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace deltascan
