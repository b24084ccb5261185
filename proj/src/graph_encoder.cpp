// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <deltascan/encoder.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace deltascan::encoder
{
std::vector<double> fusion_weights(std::span<const std::uint32_t> starts, double avg_block_len,
    const EmbeddingConfig& config)
{
    if (starts.empty())
        return {};
    if (!(avg_block_len > 0))
        throw std::invalid_argument{"average block length must be positive"};
    const double s_min = *std::min_element(starts.begin(), starts.end());
    std::vector<double> a(starts.size());
    for (std::size_t i = 0; i < starts.size(); ++i)
    {
        const double r = std::clamp((starts[i] - s_min) / avg_block_len, 0.0, config.clip_cap);
        a[i] = std::exp(config.alpha * r);
    }
    const double m = *std::max_element(a.begin(), a.end());
    double sum = 0;
    for (auto& x : a)
        sum += x = std::exp(x - m);
    for (auto& x : a)
        x /= sum;
    return a;
}

Mat fuse_block(std::span<const Occurrence> occurrences, double avg_block_len, const EmbeddingConfig& config)
{
    if (occurrences.empty())
        throw std::invalid_argument{"fuse_block needs at least one occurrence"};
    const auto rows = occurrences[0].slice.rows();
    const auto cols = occurrences[0].slice.cols();
    std::vector<std::uint32_t> starts;
    for (const auto& o : occurrences)
    {
        if (o.slice.rows() != rows || o.slice.cols() != cols)
            throw ShapeMismatch{"occurrence slices differ in shape"};
        starts.push_back(o.start);
    }
    const auto w = fusion_weights(starts, avg_block_len, config);
    Mat z = Mat::Zero(rows, cols);
    for (std::size_t i = 0; i < occurrences.size(); ++i)
        z += static_cast<float>(w[i]) * occurrences[i].slice;
    return z;
}

Mat fallback_block(const Mat& word_rows, const EncoderParams& params)
{
    if (word_rows.cols() != params.word_to_seq.rows())
        throw DimensionMismatch{"word rows do not match the fallback projection"};
    return word_rows * params.word_to_seq;
}

InstructionGraph build_instruction_graph(const cfg::FunctionCfg& function, std::span<const Mat> fused)
{
    if (fused.size() != function.blocks.size())
        throw ShapeMismatch{"one fused matrix per block required"};
    InstructionGraph g;
    g.block_offset.reserve(fused.size() + 1);
    std::uint32_t n = 0;
    Eigen::Index width = fused.empty() ? 0 : fused[0].cols();
    for (std::size_t b = 0; b < fused.size(); ++b)
    {
        if (static_cast<std::size_t>(fused[b].rows()) != function.blocks[b].instructions.size() ||
            fused[b].cols() != width)
            throw ShapeMismatch{"fused block rows must equal its instruction count"};
        g.block_offset.push_back(n);
        n += static_cast<std::uint32_t>(fused[b].rows());
    }
    g.block_offset.push_back(n);
    g.nodes.resize(n, width);
    for (std::size_t b = 0; b < fused.size(); ++b)
    {
        const auto first = g.block_offset[b];
        g.nodes.middleRows(first, fused[b].rows()) = fused[b];
        for (std::uint32_t t = first; t + 1 < g.block_offset[b + 1]; ++t)
            g.seq_edges.emplace_back(t, t + 1);
    }
    g.cfg_edges.reserve(function.edges.size());
    for (const auto& e : function.edges)
        g.cfg_edges.emplace_back(g.block_offset[e.src + 1] - 1, g.block_offset[e.dst]);
    std::sort(g.cfg_edges.begin(), g.cfg_edges.end());
    g.cfg_edges.erase(std::unique(g.cfg_edges.begin(), g.cfg_edges.end()), g.cfg_edges.end());
    return g;
}

namespace
{
/// out[dst] += coef[e, k] * wh[src] for every arc, head k written at
/// k * stride. A nonzero W fixes the head width at compile time.
template <int W>
void aggregate(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& arcs, const Mat& coef, const Mat& wh,
    Eigen::Index heads, Eigen::Index stride, Mat& out)
{
    const Eigen::Index hd = W > 0 ? W : wh.cols() / heads;
    for (std::size_t e = 0; e < arcs.size(); ++e)
    {
        const auto [dst, src] = arcs[e];
        const float* c = coef.row(static_cast<Eigen::Index>(e)).data();
        const float* in = wh.row(src).data();
        float* o = out.row(dst).data();
        for (Eigen::Index k = 0; k < heads; ++k)
            for (Eigen::Index t = 0; t < hd; ++t)
                o[k * stride + t] += c[k] * in[k * hd + t];
    }
}
}  // namespace

Mat encode_graph(const InstructionGraph& graph, const EncoderParams& params, const EmbeddingConfig& config)
{
    const auto n = static_cast<Eigen::Index>(graph.node_count());
    if (n == 0)
        throw std::invalid_argument{"graph has no nodes"};
    if (graph.nodes.cols() != params.gat.front().w.rows())
        throw DimensionMismatch{"node width does not match the first graph layer"};

    // In-neighbors of every node, self-loop included, sorted and unique, as CSR.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> arcs;
    arcs.reserve(static_cast<std::size_t>(n) + graph.seq_edges.size() + graph.cfg_edges.size());
    for (std::uint32_t j = 0; j < n; ++j)
        arcs.emplace_back(j, j);
    for (const auto* edges : {&graph.seq_edges, &graph.cfg_edges})
        for (const auto& [src, dst] : *edges)
        {
            if (src >= n || dst >= n)
                throw std::out_of_range{"edge endpoint outside the graph"};
            arcs.emplace_back(dst, src);
        }
    std::sort(arcs.begin(), arcs.end());
    arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());
    const auto nnz = static_cast<Eigen::Index>(arcs.size());
    std::vector<Eigen::Index> first(static_cast<std::size_t>(n) + 1, 0);
    for (const auto& [dst, src] : arcs)
        ++first[dst + 1];
    std::partial_sum(first.begin(), first.end(), first.begin());

    Mat h = graph.nodes;
    for (const auto& layer : params.gat)
    {
        if (h.cols() != layer.w.rows())
            throw DimensionMismatch{"graph layer input width mismatch"};
        const Mat wh = h * layer.w;
        const auto heads = static_cast<Eigen::Index>(layer.heads);
        const auto hd = static_cast<Eigen::Index>(layer.head_dim);
        Mat src_score(n, heads), dst_score(n, heads);
        for (Eigen::Index k = 0; k < heads; ++k)
        {
            src_score.col(k) = wh.middleCols(k * hd, hd) * layer.a_src.row(k).transpose();
            dst_score.col(k) = wh.middleCols(k * hd, hd) * layer.a_dst.row(k).transpose();
        }

        Mat coef(nnz, heads);
        for (Eigen::Index e = 0; e < nnz; ++e)
        {
            const auto [dst, src] = arcs[static_cast<std::size_t>(e)];
            for (Eigen::Index k = 0; k < heads; ++k)
                coef(e, k) = src_score(src, k) + dst_score(dst, k);
        }
        coef = linalg::leaky_relu(coef.array(), config.leaky_slope).matrix();
        for (Eigen::Index j = 0; j < n; ++j)
        {
            auto rows = coef.middleRows(first[j], first[j + 1] - first[j]);
            rows.rowwise() -= rows.colwise().maxCoeff();
        }
        coef = coef.array().exp().matrix();
        for (Eigen::Index j = 0; j < n; ++j)
        {
            auto rows = coef.middleRows(first[j], first[j + 1] - first[j]);
            RowVec norm = rows.colwise().sum().cwiseInverse();
            if (!layer.concat)
                norm /= static_cast<float>(heads);
            rows.array().rowwise() *= norm.array();
        }

        Mat out = Mat::Zero(n, layer.concat ? heads * hd : hd);
        if (layer.concat && hd == 16)
            aggregate<16>(arcs, coef, wh, heads, hd, out);
        else
            aggregate<0>(arcs, coef, wh, heads, layer.concat ? hd : 0, out);
        h = linalg::elu(out.array()).matrix();
    }
    return h;
}

}  // namespace deltascan::encoder
