// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deltascan/bytes.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace deltascan::evm
{
/// Static properties of one opcode byte. The table is pinned to the Shanghai
/// instruction set; bytes without a definition there decode as INVALID.
struct Opcode
{
    std::string_view mnemonic;
    std::uint8_t byte_value = 0;
    std::uint8_t immediate_len = 0;
    std::uint8_t stack_pops = 0;
    std::uint8_t stack_pushes = 0;
    bool is_terminator = false;
    bool is_jump = false;
    bool is_jumpi = false;
    bool is_external_call = false;
    bool is_sload = false;
    bool is_sstore = false;
    bool defined = false;

    bool is_push() const noexcept { return byte_value >= 0x5f && byte_value <= 0x7f; }
    bool is_jumpdest() const noexcept { return byte_value == 0x5b; }
    /// Terminators plus JUMPI: any instruction after which a new block starts.
    bool ends_block() const noexcept { return is_terminator || is_jumpi; }
};

namespace op
{
inline constexpr std::uint8_t STOP = 0x00;
inline constexpr std::uint8_t EQ = 0x14;
inline constexpr std::uint8_t LT = 0x10;
inline constexpr std::uint8_t GT = 0x11;
inline constexpr std::uint8_t SHR = 0x1c;
inline constexpr std::uint8_t DIV = 0x04;
inline constexpr std::uint8_t CALLDATALOAD = 0x35;
inline constexpr std::uint8_t CALLDATASIZE = 0x36;
inline constexpr std::uint8_t SLOAD = 0x54;
inline constexpr std::uint8_t SSTORE = 0x55;
inline constexpr std::uint8_t JUMP = 0x56;
inline constexpr std::uint8_t JUMPI = 0x57;
inline constexpr std::uint8_t JUMPDEST = 0x5b;
inline constexpr std::uint8_t PUSH0 = 0x5f;
inline constexpr std::uint8_t PUSH1 = 0x60;
inline constexpr std::uint8_t PUSH2 = 0x61;
inline constexpr std::uint8_t PUSH4 = 0x63;
inline constexpr std::uint8_t PUSH32 = 0x7f;
inline constexpr std::uint8_t DUP1 = 0x80;
inline constexpr std::uint8_t DUP16 = 0x8f;
inline constexpr std::uint8_t SWAP1 = 0x90;
inline constexpr std::uint8_t SWAP16 = 0x9f;
inline constexpr std::uint8_t CALL = 0xf1;
inline constexpr std::uint8_t CALLCODE = 0xf2;
inline constexpr std::uint8_t RETURN = 0xf3;
inline constexpr std::uint8_t DELEGATECALL = 0xf4;
inline constexpr std::uint8_t STATICCALL = 0xfa;
inline constexpr std::uint8_t REVERT = 0xfd;
inline constexpr std::uint8_t INVALID = 0xfe;
inline constexpr std::uint8_t SELFDESTRUCT = 0xff;
}  // namespace op

/// The 256-entry opcode table.
const std::array<Opcode, 256>& opcode_table() noexcept;

inline const Opcode& opcode(std::uint8_t byte) noexcept
{
    return opcode_table()[byte];
}

/// Reverse lookup by mnemonic; undefined names return nullopt.
std::optional<std::uint8_t> opcode_by_mnemonic(std::string_view mnemonic) noexcept;

struct Instruction
{
    std::uint32_t offset = 0;
    std::uint8_t byte = 0;
    Bytes immediate;
    bool truncated = false;

    const Opcode& op() const noexcept { return opcode(byte); }
    std::string_view mnemonic() const noexcept { return op().mnemonic; }
    std::uint32_t next_offset() const noexcept
    {
        return offset + 1 + static_cast<std::uint32_t>(immediate.size());
    }

    /// Value of a PUSH immediate, if it fits in 64 bits. PUSH0 yields 0.
    std::optional<std::uint64_t> push_value() const noexcept;

    bool operator==(const Instruction&) const = default;
};

struct Program
{
    std::vector<Instruction> instructions;
    Bytes stripped_metadata;
    /// keccak-256 of the analyzed code region (metadata excluded).
    Hash256 code_hash{};
};

struct SplitCode
{
    Bytes body;
    Bytes metadata;
};

/// Removes the trailing CBOR metadata blob appended by Solidity/Vyper
/// compilers. Only strips on positive identification of the blob.
SplitCode strip_metadata(BytesView code);

/// Decodes every byte; never fails. A PUSH running past the end becomes a
/// final truncated instruction carrying the available bytes.
Program disassemble(BytesView code_body);

/// strip_metadata followed by disassemble; the metadata is kept on the Program.
Program load_runtime_code(BytesView code);

/// Inverse of disassemble over the analyzed region.
Bytes reserialize(const Program& program);

}  // namespace deltascan::evm
