// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <deltascan/encoder.hpp>

#include <map>

namespace deltascan::encoder
{
bool FunctionEmbedding::operator==(const FunctionEmbedding& o) const
{
    return function_id.code_hash == o.function_id.code_hash && function_id.selector == o.function_id.selector &&
           function_id.entry_offset == o.function_id.entry_offset && selector == o.selector &&
           blocks.rows() == o.blocks.rows() && blocks.cols() == o.blocks.cols() && blocks == o.blocks &&
           fallback == o.fallback && truncated_paths == o.truncated_paths;
}

FunctionEmbedding embed_function(const cfg::FunctionCfg& function, const cfg::PathSet& paths, const Vocabulary& vocab,
    const EncoderParams& params, const EmbeddingConfig& config, StageToggles stages,
    std::atomic<std::uint64_t>* truncations, SequenceCache* cache)
{
    if (function.blocks.empty())
        throw EmptyFunction{"function has no blocks"};
    if (vocab.size() > 0 && vocab.dim() != config.word_dim)
        throw DimensionMismatch{"vocabulary dimension differs from word_dim"};

    const auto nblocks = function.blocks.size();
    const auto dw = static_cast<Eigen::Index>(config.word_dim);
    const auto ds = static_cast<Eigen::Index>(config.seq_dim);

    // Vocabulary ids per block, -1 for unknown tokens.
    std::vector<std::vector<int>> block_ids(nblocks);
    for (std::size_t b = 0; b < nblocks; ++b)
        for (const auto& ins : function.blocks[b].instructions)
            block_ids[b].push_back(vocab.index_of(token_of(ins)));
    auto word_rows = [&](const std::vector<int>& ids) {
        Mat m = Mat::Zero(static_cast<Eigen::Index>(ids.size()), dw);
        for (std::size_t t = 0; t < ids.size(); ++t)
            if (ids[t] >= 0)
                m.row(static_cast<Eigen::Index>(t)) = vocab.vectors().row(ids[t]);
        return m;
    };

    FunctionEmbedding out;
    out.function_id = function.function_id;
    out.selector = function.selector;
    out.fallback.assign(nblocks, false);

    std::vector<Mat> fused(nblocks);
    if (stages.sequence)
    {
        // Identical truncated token streams encode identically; run each once.
        SequenceCache local;
        auto& known = cache ? *cache : local;
        std::vector<const Mat*> path_rows(paths.paths.size());
        std::vector<std::size_t> valid_len(paths.paths.size());
        for (std::size_t p = 0; p < paths.paths.size(); ++p)
        {
            std::vector<int> ids;
            std::size_t full = 0;
            for (const auto b : paths.paths[p].blocks)
                full += block_ids[b].size();
            for (const auto b : paths.paths[p].blocks)
            {
                for (const int id : block_ids[b])
                {
                    if (ids.size() == config.m_max)
                        break;
                    ids.push_back(id);
                }
            }
            if (full > config.m_max)
            {
                ++out.truncated_paths;
                if (truncations)
                    truncations->fetch_add(1, std::memory_order_relaxed);
            }
            valid_len[p] = ids.size();
            auto it = known.find(ids);
            if (it == known.end())
            {
                const Mat x = word_rows(ids);
                const std::size_t len[] = {ids.size()};
                Mat h = ids.empty() ? Mat(0, ds) : encode_packed(x, len, params, config);
                it = known.emplace(std::move(ids), std::move(h)).first;
            }
            path_rows[p] = &it->second;
        }

        std::vector<std::vector<Occurrence>> occ(nblocks);
        for (std::size_t p = 0; p < paths.paths.size(); ++p)
        {
            const auto& path = paths.paths[p];
            const Mat& h = *path_rows[p];
            for (std::size_t t = 0; t < path.blocks.size(); ++t)
            {
                const auto b = path.blocks[t];
                const auto s = path.start_positions[t];
                const auto k = block_ids[b].size();
                if (s + k > valid_len[p])
                    break;
                occ[b].push_back({h.middleRows(s, static_cast<Eigen::Index>(k)), s});
            }
        }
        const double avg = function.avg_block_len();
        for (std::size_t b = 0; b < nblocks; ++b)
        {
            if (occ[b].empty())
            {
                fused[b] = fallback_block(word_rows(block_ids[b]), params);
                out.fallback[b] = true;
            }
            else
            {
                fused[b] = fuse_block(occ[b], avg, config);
            }
        }
    }
    else
    {
        for (std::size_t b = 0; b < nblocks; ++b)
            fused[b] = fallback_block(word_rows(block_ids[b]), params);
    }

    out.blocks.resize(static_cast<Eigen::Index>(nblocks), static_cast<Eigen::Index>(config.block_dim));
    if (stages.graph)
    {
        const auto graph = build_instruction_graph(function, fused);
        const Mat states = encode_graph(graph, params, config);
        for (std::size_t b = 0; b < nblocks; ++b)
        {
            const auto first = graph.block_offset[b];
            const auto k = graph.block_offset[b + 1] - first;
            out.blocks.row(static_cast<Eigen::Index>(b)) = pool_block(states.middleRows(first, k), params.pool).transpose();
        }
    }
    else
    {
        for (std::size_t b = 0; b < nblocks; ++b)
        {
            const Mat projected = fused[b] * params.seq_to_block;
            out.blocks.row(static_cast<Eigen::Index>(b)) = pool_block(projected, params.pool).transpose();
        }
    }
    return out;
}

}  // namespace deltascan::encoder
