// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deltascan/evm.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace deltascan::cfg
{
using BlockId = std::uint32_t;

enum class Terminator : std::uint8_t
{
    jump,
    jumpi,
    fallthrough,
    stop,
    return_,
    revert,
    invalid,
    selfdestruct,
};

std::string_view to_string(Terminator t) noexcept;

/// True for terminators that end execution of the call frame.
constexpr bool is_halting(Terminator t) noexcept
{
    return t == Terminator::stop || t == Terminator::return_ || t == Terminator::revert ||
           t == Terminator::invalid || t == Terminator::selfdestruct;
}

struct BasicBlock
{
    BlockId id = 0;
    std::uint32_t start_offset = 0;
    std::vector<evm::Instruction> instructions;
    Terminator terminator = Terminator::fallthrough;

    std::size_t instr_count() const noexcept { return instructions.size(); }
    bool starts_with_jumpdest() const noexcept
    {
        return !instructions.empty() && instructions.front().op().is_jumpdest();
    }
};

enum class EdgeKind : std::uint8_t
{
    jump_taken,
    jumpi_true,
    jumpi_false,
    fallthrough,
};

std::string_view to_string(EdgeKind k) noexcept;

struct Edge
{
    BlockId src = 0;
    BlockId dst = 0;
    EdgeKind kind = EdgeKind::fallthrough;
    /// Over-approximated edge of a jump whose target is not a pushed constant.
    bool dynamic = false;

    auto operator<=>(const Edge&) const = default;
};

/// Leaders: offset 0, every JUMPDEST, every instruction after a JUMPI or terminator.
std::vector<BasicBlock> partition_blocks(const evm::Program& program);

/// Sorted, duplicate-free edge list over the contract-wide blocks.
std::vector<Edge> resolve_edges(const std::vector<BasicBlock>& blocks);

struct ContractGraph
{
    Hash256 code_hash{};
    std::vector<BasicBlock> blocks;
    std::vector<Edge> edges;
};

ContractGraph build_contract_graph(const evm::Program& program);

struct FunctionId
{
    Hash256 code_hash{};
    /// Selector value, or the entry offset for functions without a selector.
    std::optional<Selector> selector;
    std::uint32_t entry_offset = 0;

    auto operator<=>(const FunctionId&) const = default;
};

/// Function-local copy of the blocks reachable from one entry point.
/// Block ids are dense and local; contract_block maps them back.
struct FunctionCfg
{
    FunctionId function_id;
    std::optional<Selector> selector;
    BlockId entry_block = 0;
    std::vector<BasicBlock> blocks;
    std::vector<Edge> edges;
    std::vector<BlockId> contract_block;

    /// Mean instruction count over blocks (zero when empty).
    double avg_block_len() const noexcept;

    /// Successor ids of a block, ascending and unique.
    std::vector<BlockId> successors(BlockId b) const;
};

struct SelectorMap
{
    std::map<Selector, BlockId> entries;
    std::optional<BlockId> fallback_entry;
};

struct FunctionRecovery
{
    SelectorMap selectors;
    std::vector<FunctionCfg> functions;
    /// Code had no PUSH4/compare/JUMPI dispatch pattern; functions holds one
    /// anonymous function rooted at block 0.
    bool no_dispatcher = false;
    /// Contract blocks classified as dispatcher code.
    std::vector<BlockId> dispatcher_blocks;
};

FunctionRecovery recover_functions(const ContractGraph& graph);

/// Builds a FunctionCfg from the blocks reachable from `entry`, never entering
/// blocks in `stop_at`.
FunctionCfg extract_function(const ContractGraph& graph, BlockId entry,
    std::optional<Selector> selector, const std::vector<bool>& stop_at);

enum class PathEnd : std::uint8_t
{
    natural_exit,
    all_successors_visited,
    depth_cap,
};

std::string_view to_string(PathEnd e) noexcept;

struct ExecutionPath
{
    std::vector<BlockId> blocks;
    /// Cumulative instruction offset of each block within the flattened path.
    std::vector<std::uint32_t> start_positions;
    PathEnd terminal_reason = PathEnd::natural_exit;
};

struct PathSet
{
    std::vector<ExecutionPath> paths;
    /// Enumeration stopped at max_paths with work remaining.
    bool capped = false;
};

inline constexpr std::size_t default_max_paths = 64;

/// Loop-avoiding DFS from the entry block, successors in ascending id order.
PathSet extract_paths(const FunctionCfg& cfg, std::size_t max_paths = default_max_paths);

/// Graph description text used by the `cfg` subcommand.
std::string describe(const ContractGraph& graph, const FunctionRecovery& recovery);

}  // namespace deltascan::cfg
