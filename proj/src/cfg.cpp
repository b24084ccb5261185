// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <deltascan/cfg.hpp>

#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace deltascan::cfg
{
std::string_view to_string(Terminator t) noexcept
{
    switch (t)
    {
    case Terminator::jump: return "jump";
    case Terminator::jumpi: return "jumpi";
    case Terminator::fallthrough: return "fallthrough";
    case Terminator::stop: return "stop";
    case Terminator::return_: return "return";
    case Terminator::revert: return "revert";
    case Terminator::invalid: return "invalid";
    case Terminator::selfdestruct: return "selfdestruct";
    }
    return "?";
}

std::string_view to_string(EdgeKind k) noexcept
{
    switch (k)
    {
    case EdgeKind::jump_taken: return "jump_taken";
    case EdgeKind::jumpi_true: return "jumpi_true";
    case EdgeKind::jumpi_false: return "jumpi_false";
    case EdgeKind::fallthrough: return "fallthrough";
    }
    return "?";
}

std::string_view to_string(PathEnd e) noexcept
{
    switch (e)
    {
    case PathEnd::natural_exit: return "natural_exit";
    case PathEnd::all_successors_visited: return "all_successors_visited";
    case PathEnd::depth_cap: return "depth_cap";
    }
    return "?";
}

namespace
{
Terminator classify(const evm::Instruction& last) noexcept
{
    const auto& o = last.op();
    if (o.is_jump)
        return Terminator::jump;
    if (o.is_jumpi)
        return Terminator::jumpi;
    switch (last.byte)
    {
    case evm::op::STOP: return Terminator::stop;
    case evm::op::RETURN: return Terminator::return_;
    case evm::op::REVERT: return Terminator::revert;
    case evm::op::SELFDESTRUCT: return Terminator::selfdestruct;
    default: break;
    }
    return o.is_terminator ? Terminator::invalid : Terminator::fallthrough;
}

bool is_dup_or_swap(std::uint8_t b) noexcept
{
    return (b >= evm::op::DUP1 && b <= evm::op::DUP16) ||
           (b >= evm::op::SWAP1 && b <= evm::op::SWAP16);
}

// Index of the first PUSH4 that is compared (after at most two DUP/SWAP) by
// one of `compare_ops`, or -1.
int find_push4_compare(const BasicBlock& block, std::initializer_list<std::uint8_t> compare_ops)
{
    const auto& ins = block.instructions;
    for (std::size_t i = 0; i < ins.size(); ++i)
    {
        if (ins[i].byte != evm::op::PUSH4 || ins[i].truncated)
            continue;
        std::size_t j = i + 1;
        while (j < ins.size() && j <= i + 2 && is_dup_or_swap(ins[j].byte))
            ++j;
        if (j < ins.size() &&
            std::find(compare_ops.begin(), compare_ops.end(), ins[j].byte) != compare_ops.end())
            return static_cast<int>(i);
    }
    return -1;
}

// PUSH4 s; [DUP/SWAP]{0,2}; EQ; PUSHn dest; JUMPI
std::optional<Selector> selector_compare(const BasicBlock& block)
{
    const auto& ins = block.instructions;
    const auto n = ins.size();
    if (block.terminator != Terminator::jumpi || n < 4)
        return std::nullopt;
    if (!ins[n - 2].op().is_push() || ins[n - 3].byte != evm::op::EQ)
        return std::nullopt;
    for (std::size_t k = n - 3, skipped = 0; k > 0 && skipped <= 2;)
    {
        --k;
        if (ins[k].byte == evm::op::PUSH4 && !ins[k].truncated)
            return Selector::from_bytes(ins[k].immediate);
        if (!is_dup_or_swap(ins[k].byte))
            break;
        ++skipped;
    }
    return std::nullopt;
}

bool contains(const BasicBlock& block, std::uint8_t byte)
{
    return std::any_of(block.instructions.begin(), block.instructions.end(),
        [byte](const evm::Instruction& i) { return i.byte == byte; });
}

// Blocks that belong to the selector dispatch chain: selector extraction,
// calldata-size guards, and PUSH4 comparisons (EQ, or GT/LT for split search).
bool dispatcher_like(const BasicBlock& block)
{
    if (block.terminator != Terminator::jumpi && block.terminator != Terminator::jump &&
        block.terminator != Terminator::fallthrough)
        return false;
    if (selector_compare(block))
        return true;
    if (block.terminator == Terminator::jumpi &&
        find_push4_compare(block, {evm::op::GT, evm::op::LT}) >= 0)
        return true;
    if (contains(block, evm::op::CALLDATALOAD) &&
        (contains(block, evm::op::SHR) || contains(block, evm::op::DIV)))
        return true;
    if (block.terminator == Terminator::jumpi && contains(block, evm::op::CALLDATASIZE) &&
        contains(block, evm::op::LT))
        return true;
    return false;
}

std::vector<std::vector<std::pair<BlockId, bool>>> adjacency(
    std::size_t n, const std::vector<Edge>& edges)
{
    std::vector<std::vector<std::pair<BlockId, bool>>> adj(n);
    for (const auto& e : edges)
        adj[e.src].emplace_back(e.dst, e.dynamic);
    for (auto& list : adj)
    {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end(),
                       [](const auto& a, const auto& b) { return a.first == b.first; }),
            list.end());
    }
    return adj;
}
}  // namespace

std::vector<BasicBlock> partition_blocks(const evm::Program& program)
{
    std::vector<BasicBlock> blocks;
    bool start_new = true;
    for (const auto& ins : program.instructions)
    {
        if (start_new || (ins.op().is_jumpdest() && !blocks.back().instructions.empty()))
        {
            BasicBlock b;
            b.id = static_cast<BlockId>(blocks.size());
            b.start_offset = ins.offset;
            blocks.push_back(std::move(b));
        }
        blocks.back().instructions.push_back(ins);
        start_new = ins.op().ends_block();
    }
    for (auto& b : blocks)
        b.terminator = classify(b.instructions.back());
    return blocks;
}

std::vector<Edge> resolve_edges(const std::vector<BasicBlock>& blocks)
{
    std::unordered_map<std::uint64_t, BlockId> jumpdest_at;
    std::vector<BlockId> jumpdests;
    for (const auto& b : blocks)
        if (b.starts_with_jumpdest())
        {
            jumpdest_at.emplace(b.start_offset, b.id);
            jumpdests.push_back(b.id);
        }

    std::vector<Edge> edges;
    for (const auto& b : blocks)
    {
        const bool has_next = b.id + 1 < blocks.size();
        if (b.terminator == Terminator::jump || b.terminator == Terminator::jumpi)
        {
            const auto taken_kind =
                b.terminator == Terminator::jump ? EdgeKind::jump_taken : EdgeKind::jumpi_true;
            const auto& ins = b.instructions;
            const evm::Instruction* prev = ins.size() >= 2 ? &ins[ins.size() - 2] : nullptr;
            if (prev != nullptr && prev->op().is_push() && !prev->truncated)
            {
                // Constant target: a valid JUMPDEST gets one edge, anything else none.
                if (const auto v = prev->push_value())
                    if (const auto it = jumpdest_at.find(*v); it != jumpdest_at.end())
                        edges.push_back({b.id, it->second, taken_kind, false});
            }
            else
            {
                for (const auto d : jumpdests)
                    edges.push_back({b.id, d, EdgeKind::jump_taken, true});
            }
            if (b.terminator == Terminator::jumpi && has_next)
                edges.push_back({b.id, b.id + 1, EdgeKind::jumpi_false, false});
        }
        else if (b.terminator == Terminator::fallthrough && has_next)
        {
            edges.push_back({b.id, b.id + 1, EdgeKind::fallthrough, false});
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

ContractGraph build_contract_graph(const evm::Program& program)
{
    ContractGraph g;
    g.code_hash = program.code_hash;
    g.blocks = partition_blocks(program);
    g.edges = resolve_edges(g.blocks);
    return g;
}

double FunctionCfg::avg_block_len() const noexcept
{
    if (blocks.empty())
        return 0.0;
    std::size_t total = 0;
    for (const auto& b : blocks)
        total += b.instr_count();
    return static_cast<double>(total) / static_cast<double>(blocks.size());
}

std::vector<BlockId> FunctionCfg::successors(BlockId b) const
{
    std::vector<BlockId> out;
    const auto first = std::lower_bound(edges.begin(), edges.end(), Edge{b, 0, EdgeKind{}, false});
    for (auto it = first; it != edges.end() && it->src == b; ++it)
        out.push_back(it->dst);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

FunctionCfg extract_function(const ContractGraph& graph, BlockId entry,
    std::optional<Selector> selector, const std::vector<bool>& stop_at)
{
    const auto n = graph.blocks.size();
    const auto adj = adjacency(n, graph.edges);
    std::vector<bool> seen(n, false);
    std::deque<BlockId> queue{entry};
    seen[entry] = true;
    while (!queue.empty())
    {
        const auto b = queue.front();
        queue.pop_front();
        for (const auto& [d, dynamic] : adj[b])
        {
            if (seen[d] || (d < stop_at.size() && stop_at[d]))
                continue;
            seen[d] = true;
            queue.push_back(d);
        }
    }

    FunctionCfg f;
    f.selector = selector;
    f.function_id = {graph.code_hash, selector, graph.blocks[entry].start_offset};
    std::vector<BlockId> local(n, 0);
    for (BlockId b = 0; b < n; ++b)
    {
        if (!seen[b])
            continue;
        local[b] = static_cast<BlockId>(f.blocks.size());
        f.contract_block.push_back(b);
        auto copy = graph.blocks[b];
        copy.id = local[b];
        f.blocks.push_back(std::move(copy));
    }
    f.entry_block = local[entry];
    for (const auto& e : graph.edges)
        if (seen[e.src] && seen[e.dst])
            f.edges.push_back({local[e.src], local[e.dst], e.kind, e.dynamic});
    std::sort(f.edges.begin(), f.edges.end());
    return f;
}

FunctionRecovery recover_functions(const ContractGraph& graph)
{
    FunctionRecovery out;
    const auto n = graph.blocks.size();
    if (n == 0)
    {
        out.no_dispatcher = true;
        return out;
    }

    const auto adj = adjacency(n, graph.edges);
    std::vector<bool> in_dispatcher(n, false);
    std::vector<bool> is_entry(n, false);
    std::map<Selector, BlockId> entries;

    auto record_selector = [&](BlockId b) {
        const auto sel = selector_compare(graph.blocks[b]);
        if (!sel)
            return;
        for (const auto& [d, dynamic] : adj[b])
        {
            // The jumpi_true edge carries the destination; jumpi_false is b + 1.
            if (dynamic || d == b + 1)
                continue;
            if (entries.emplace(*sel, d).second)
                is_entry[d] = true;
        }
    };

    std::deque<BlockId> work{0};
    in_dispatcher[0] = true;
    out.dispatcher_blocks.push_back(0);
    record_selector(0);
    while (!work.empty())
    {
        const auto b = work.front();
        work.pop_front();
        for (const auto& [d, dynamic] : adj[b])
        {
            if (dynamic || in_dispatcher[d] || is_entry[d])
                continue;
            if (!dispatcher_like(graph.blocks[d]))
                continue;
            in_dispatcher[d] = true;
            out.dispatcher_blocks.push_back(d);
            record_selector(d);
            work.push_back(d);
        }
    }
    std::sort(out.dispatcher_blocks.begin(), out.dispatcher_blocks.end());

    if (entries.empty())
    {
        out.no_dispatcher = true;
        out.dispatcher_blocks.clear();
        out.functions.push_back(extract_function(graph, 0, std::nullopt, {}));
        return out;
    }

    // Whatever the dispatcher reaches that is neither dispatch code nor a
    // selector entry is the fallback path; the lowest block id wins.
    for (const auto d_block : out.dispatcher_blocks)
        for (const auto& [d, dynamic] : adj[d_block])
            if (!dynamic && !in_dispatcher[d] && !is_entry[d])
                if (!out.selectors.fallback_entry || d < *out.selectors.fallback_entry)
                    out.selectors.fallback_entry = d;
    out.selectors.entries = entries;

    for (const auto& [sel, entry] : entries)
    {
        auto stop = in_dispatcher;
        for (const auto& [other_sel, other_entry] : entries)
            if (other_entry != entry)
                stop[other_entry] = true;
        out.functions.push_back(extract_function(graph, entry, sel, stop));
    }
    if (const auto fb = out.selectors.fallback_entry)
    {
        auto stop = in_dispatcher;
        for (const auto& [sel, entry] : entries)
            stop[entry] = true;
        out.functions.push_back(extract_function(graph, *fb, std::nullopt, stop));
    }
    return out;
}

PathSet extract_paths(const FunctionCfg& cfg, std::size_t max_paths)
{
    PathSet out;
    if (cfg.blocks.empty() || max_paths == 0)
        return out;

    const auto n = cfg.blocks.size();
    std::vector<std::vector<BlockId>> succ(n);
    for (const auto& e : cfg.edges)
        succ[e.src].push_back(e.dst);
    for (auto& s : succ)
        s.erase(std::unique(s.begin(), s.end()), s.end());  // edges are sorted by (src, dst)

    struct Frame
    {
        BlockId block;
        std::size_t next = 0;
        bool leaf = false;
    };
    std::vector<bool> on_path(n, false);
    std::vector<BlockId> path;
    std::vector<Frame> stack;

    bool stop = false;
    auto emit = [&](PathEnd reason) {
        if (out.paths.size() == max_paths)
        {
            out.capped = true;
            stop = true;
            return;
        }
        ExecutionPath p;
        p.blocks = path;
        p.terminal_reason = reason;
        p.start_positions.reserve(path.size());
        std::uint32_t pos = 0;
        for (const auto b : path)
        {
            p.start_positions.push_back(pos);
            pos += static_cast<std::uint32_t>(cfg.blocks[b].instr_count());
        }
        out.paths.push_back(std::move(p));
    };
    auto enter = [&](BlockId b) {
        on_path[b] = true;
        path.push_back(b);
        Frame f{b};
        const auto& s = succ[b];
        if (s.empty())
        {
            f.leaf = true;
            emit(PathEnd::natural_exit);
        }
        else if (std::all_of(s.begin(), s.end(), [&](BlockId d) { return on_path[d]; }))
        {
            f.leaf = true;
            emit(PathEnd::all_successors_visited);
        }
        stack.push_back(f);
    };

    enter(cfg.entry_block);
    while (!stack.empty() && !stop)
    {
        auto& top = stack.back();
        const auto& s = succ[top.block];
        if (top.leaf || top.next == s.size())
        {
            on_path[top.block] = false;
            path.pop_back();
            stack.pop_back();
            continue;
        }
        const auto d = s[top.next++];
        if (!on_path[d])
            enter(d);
    }
    return out;
}

std::string describe(const ContractGraph& graph, const FunctionRecovery& recovery)
{
    std::ostringstream os;
    for (const auto& b : graph.blocks)
        os << "block " << b.id << ' ' << b.start_offset << ' ' << to_string(b.terminator) << '\n';
    for (const auto& e : graph.edges)
    {
        os << "edge " << e.src << ' ' << e.dst << ' ' << to_string(e.kind);
        if (e.dynamic)
            os << " dynamic";
        os << '\n';
    }
    for (const auto& [sel, entry] : recovery.selectors.entries)
        os << "func " << sel.hex() << ' ' << entry << '\n';
    if (recovery.selectors.fallback_entry)
        os << "fallback " << *recovery.selectors.fallback_entry << '\n';
    return os.str();
}

}  // namespace deltascan::cfg
