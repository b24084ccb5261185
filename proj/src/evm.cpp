// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <deltascan/evm.hpp>
#include <deltascan/keccak.hpp>

#include <algorithm>
#include <string>

namespace deltascan::evm
{
namespace
{
struct Def
{
    std::uint8_t byte;
    std::string_view name;
    std::uint8_t pops;
    std::uint8_t pushes;
};

// Shanghai instruction set, excluding PUSHn/DUPn/SWAPn/LOGn which are generated.
constexpr Def base_defs[] = {
    {0x00, "STOP", 0, 0},
    {0x01, "ADD", 2, 1},
    {0x02, "MUL", 2, 1},
    {0x03, "SUB", 2, 1},
    {0x04, "DIV", 2, 1},
    {0x05, "SDIV", 2, 1},
    {0x06, "MOD", 2, 1},
    {0x07, "SMOD", 2, 1},
    {0x08, "ADDMOD", 3, 1},
    {0x09, "MULMOD", 3, 1},
    {0x0a, "EXP", 2, 1},
    {0x0b, "SIGNEXTEND", 2, 1},
    {0x10, "LT", 2, 1},
    {0x11, "GT", 2, 1},
    {0x12, "SLT", 2, 1},
    {0x13, "SGT", 2, 1},
    {0x14, "EQ", 2, 1},
    {0x15, "ISZERO", 1, 1},
    {0x16, "AND", 2, 1},
    {0x17, "OR", 2, 1},
    {0x18, "XOR", 2, 1},
    {0x19, "NOT", 1, 1},
    {0x1a, "BYTE", 2, 1},
    {0x1b, "SHL", 2, 1},
    {0x1c, "SHR", 2, 1},
    {0x1d, "SAR", 2, 1},
    {0x20, "KECCAK256", 2, 1},
    {0x30, "ADDRESS", 0, 1},
    {0x31, "BALANCE", 1, 1},
    {0x32, "ORIGIN", 0, 1},
    {0x33, "CALLER", 0, 1},
    {0x34, "CALLVALUE", 0, 1},
    {0x35, "CALLDATALOAD", 1, 1},
    {0x36, "CALLDATASIZE", 0, 1},
    {0x37, "CALLDATACOPY", 3, 0},
    {0x38, "CODESIZE", 0, 1},
    {0x39, "CODECOPY", 3, 0},
    {0x3a, "GASPRICE", 0, 1},
    {0x3b, "EXTCODESIZE", 1, 1},
    {0x3c, "EXTCODECOPY", 4, 0},
    {0x3d, "RETURNDATASIZE", 0, 1},
    {0x3e, "RETURNDATACOPY", 3, 0},
    {0x3f, "EXTCODEHASH", 1, 1},
    {0x40, "BLOCKHASH", 1, 1},
    {0x41, "COINBASE", 0, 1},
    {0x42, "TIMESTAMP", 0, 1},
    {0x43, "NUMBER", 0, 1},
    {0x44, "PREVRANDAO", 0, 1},
    {0x45, "GASLIMIT", 0, 1},
    {0x46, "CHAINID", 0, 1},
    {0x47, "SELFBALANCE", 0, 1},
    {0x48, "BASEFEE", 0, 1},
    {0x50, "POP", 1, 0},
    {0x51, "MLOAD", 1, 1},
    {0x52, "MSTORE", 2, 0},
    {0x53, "MSTORE8", 2, 0},
    {0x54, "SLOAD", 1, 1},
    {0x55, "SSTORE", 2, 0},
    {0x56, "JUMP", 1, 0},
    {0x57, "JUMPI", 2, 0},
    {0x58, "PC", 0, 1},
    {0x59, "MSIZE", 0, 1},
    {0x5a, "GAS", 0, 1},
    {0x5b, "JUMPDEST", 0, 0},
    {0x5f, "PUSH0", 0, 1},
    {0xf0, "CREATE", 3, 1},
    {0xf1, "CALL", 7, 1},
    {0xf2, "CALLCODE", 7, 1},
    {0xf3, "RETURN", 2, 0},
    {0xf4, "DELEGATECALL", 6, 1},
    {0xf5, "CREATE2", 4, 1},
    {0xfa, "STATICCALL", 6, 1},
    {0xfd, "REVERT", 2, 0},
    {0xfe, "INVALID", 0, 0},
    {0xff, "SELFDESTRUCT", 1, 0},
};

// Mnemonic storage for the generated families; string_views in the table point here.
struct GeneratedNames
{
    std::array<std::string, 32> push;
    std::array<std::string, 16> dup;
    std::array<std::string, 16> swap;
    std::array<std::string, 5> log;

    GeneratedNames()
    {
        for (int i = 0; i < 32; ++i)
            push[i] = "PUSH" + std::to_string(i + 1);
        for (int i = 0; i < 16; ++i)
        {
            dup[i] = "DUP" + std::to_string(i + 1);
            swap[i] = "SWAP" + std::to_string(i + 1);
        }
        for (int i = 0; i < 5; ++i)
            log[i] = "LOG" + std::to_string(i);
    }
};

std::array<Opcode, 256> build_table()
{
    static const GeneratedNames names;
    std::array<Opcode, 256> table{};
    for (int b = 0; b < 256; ++b)
    {
        auto& o = table[b];
        o.byte_value = static_cast<std::uint8_t>(b);
        o.mnemonic = "INVALID";
        o.is_terminator = true;
    }
    auto define = [&](std::uint8_t b, std::string_view name, int pops, int pushes) {
        auto& o = table[b];
        o.mnemonic = name;
        o.stack_pops = static_cast<std::uint8_t>(pops);
        o.stack_pushes = static_cast<std::uint8_t>(pushes);
        o.defined = true;
        o.is_terminator = false;
    };
    for (const auto& d : base_defs)
        define(d.byte, d.name, d.pops, d.pushes);
    for (int i = 0; i < 32; ++i)
    {
        define(static_cast<std::uint8_t>(0x60 + i), names.push[i], 0, 1);
        table[0x60 + i].immediate_len = static_cast<std::uint8_t>(i + 1);
    }
    for (int i = 0; i < 16; ++i)
    {
        define(static_cast<std::uint8_t>(0x80 + i), names.dup[i], i + 1, i + 2);
        define(static_cast<std::uint8_t>(0x90 + i), names.swap[i], i + 2, i + 2);
    }
    for (int i = 0; i < 5; ++i)
        define(static_cast<std::uint8_t>(0xa0 + i), names.log[i], i + 2, 0);

    for (const auto b : {op::STOP, op::RETURN, op::REVERT, op::SELFDESTRUCT, op::JUMP, op::INVALID})
        table[b].is_terminator = true;
    // 0xfe is the designated INVALID opcode; count it as defined.
    table[op::INVALID].defined = true;
    table[op::JUMP].is_jump = true;
    table[op::JUMPI].is_jumpi = true;
    for (const auto b : {op::CALL, op::CALLCODE, op::DELEGATECALL, op::STATICCALL})
        table[b].is_external_call = true;
    table[op::SLOAD].is_sload = true;
    table[op::SSTORE].is_sstore = true;
    return table;
}

// Minimal CBOR reader sufficient to validate compiler metadata maps.
class CborReader
{
public:
    explicit CborReader(BytesView data) : data_{data} {}

    bool at_end() const noexcept { return pos_ == data_.size(); }

    // Parses one top-level map with text keys; records the keys seen.
    bool read_metadata_map(std::vector<std::string>& keys)
    {
        std::uint8_t major = 0;
        std::uint64_t count = 0;
        if (!read_head(major, count) || major != 5)
            return false;
        for (std::uint64_t i = 0; i < count; ++i)
        {
            std::uint64_t len = 0;
            if (!read_head(major, len) || major != 3 || len > remaining())
                return false;
            keys.emplace_back(reinterpret_cast<const char*>(data_.data() + pos_), len);
            pos_ += len;
            if (!skip_item(0))
                return false;
        }
        return true;
    }

private:
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

    bool read_head(std::uint8_t& major, std::uint64_t& arg)
    {
        if (pos_ >= data_.size())
            return false;
        const auto initial = data_[pos_++];
        major = initial >> 5;
        const auto info = initial & 0x1f;
        if (info < 24)
        {
            arg = info;
            return true;
        }
        std::size_t n = 0;
        switch (info)
        {
        case 24: n = 1; break;
        case 25: n = 2; break;
        case 26: n = 4; break;
        case 27: n = 8; break;
        default: return false;  // indefinite lengths never appear in metadata
        }
        if (n > remaining())
            return false;
        arg = 0;
        for (std::size_t i = 0; i < n; ++i)
            arg = (arg << 8) | data_[pos_++];
        return true;
    }

    bool skip_item(int depth)
    {
        if (depth > 8)
            return false;
        std::uint8_t major = 0;
        std::uint64_t arg = 0;
        if (!read_head(major, arg))
            return false;
        switch (major)
        {
        case 0:
        case 1:
        case 7:
            return true;
        case 2:
        case 3:
            if (arg > remaining())
                return false;
            pos_ += arg;
            return true;
        case 4:
            for (std::uint64_t i = 0; i < arg; ++i)
                if (!skip_item(depth + 1))
                    return false;
            return true;
        case 5:
            for (std::uint64_t i = 0; i < 2 * arg; ++i)
                if (!skip_item(depth + 1))
                    return false;
            return true;
        case 6:
            return skip_item(depth + 1);
        default:
            return false;
        }
    }

    BytesView data_;
    std::size_t pos_ = 0;
};

bool is_compiler_metadata(BytesView blob)
{
    CborReader reader{blob};
    std::vector<std::string> keys;
    if (!reader.read_metadata_map(keys) || !reader.at_end())
        return false;
    return std::any_of(keys.begin(), keys.end(), [](const std::string& k) {
        return k == "solc" || k.starts_with("ipfs") || k.starts_with("bzzr");
    });
}
}  // namespace

const std::array<Opcode, 256>& opcode_table() noexcept
{
    static const auto table = build_table();
    return table;
}

std::optional<std::uint8_t> opcode_by_mnemonic(std::string_view mnemonic) noexcept
{
    const auto& table = opcode_table();
    for (const auto& o : table)
        if (o.defined && o.mnemonic == mnemonic)
            return o.byte_value;
    return std::nullopt;
}

std::optional<std::uint64_t> Instruction::push_value() const noexcept
{
    if (!op().is_push())
        return std::nullopt;
    std::uint64_t v = 0;
    for (const auto b : immediate)
    {
        if (v >> 56)
            return std::nullopt;
        v = (v << 8) | b;
    }
    return v;
}

SplitCode strip_metadata(BytesView code)
{
    const auto whole = [&] { return SplitCode{Bytes(code.begin(), code.end()), {}}; };
    if (code.size() < 2)
        return whole();
    const std::size_t len = (std::size_t{code[code.size() - 2]} << 8) | code[code.size() - 1];
    if (len == 0 || len + 2 > code.size())
        return whole();
    const auto blob_begin = code.size() - 2 - len;
    if (!is_compiler_metadata(code.subspan(blob_begin, len)))
        return whole();
    return {Bytes(code.begin(), code.begin() + static_cast<std::ptrdiff_t>(blob_begin)),
        Bytes(code.begin() + static_cast<std::ptrdiff_t>(blob_begin), code.end())};
}

Program disassemble(BytesView code_body)
{
    Program program;
    program.code_hash = keccak256(code_body);
    auto& out = program.instructions;
    out.reserve(code_body.size());
    for (std::size_t pos = 0; pos < code_body.size();)
    {
        Instruction ins;
        ins.offset = static_cast<std::uint32_t>(pos);
        ins.byte = code_body[pos];
        const std::size_t want = ins.op().immediate_len;
        const std::size_t avail = std::min(want, code_body.size() - pos - 1);
        ins.immediate.assign(code_body.begin() + static_cast<std::ptrdiff_t>(pos + 1),
            code_body.begin() + static_cast<std::ptrdiff_t>(pos + 1 + avail));
        ins.truncated = avail < want;
        pos += 1 + avail;
        out.push_back(std::move(ins));
    }
    return program;
}

Program load_runtime_code(BytesView code)
{
    auto split = strip_metadata(code);
    auto program = disassemble(split.body);
    program.stripped_metadata = std::move(split.metadata);
    return program;
}

Bytes reserialize(const Program& program)
{
    Bytes out;
    for (const auto& ins : program.instructions)
    {
        out.push_back(ins.byte);
        out.insert(out.end(), ins.immediate.begin(), ins.immediate.end());
    }
    return out;
}

}  // namespace deltascan::evm
