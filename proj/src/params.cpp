// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "binary_io.hpp"

#include <deltascan/encoder.hpp>

#include <cmath>

namespace deltascan::encoder
{
namespace
{
constexpr char params_magic[4] = {'D', 'S', 'E', 'P'};
constexpr std::uint16_t params_version = 1;

Mat uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
    return m;
}

Vec uniform_vector(std::size_t n, std::size_t fan_in, Rng& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Vec v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = static_cast<float>(rng.uniform(-bound, bound));
    return v;
}

Vec zeros(std::size_t n)
{
    return Vec::Zero(static_cast<Eigen::Index>(n));
}

Vec ones(std::size_t n)
{
    return Vec::Ones(static_cast<Eigen::Index>(n));
}

bool same(const Mat& a, const Mat& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool same(const Vec& a, const Vec& b)
{
    return a.size() == b.size() && a == b;
}

}  // namespace

void EmbeddingConfig::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok)
            throw ConfigError{what};
    };
    require(word_dim > 0 && seq_dim > 0 && graph_dim > 0 && block_dim > 0, "dimensions must be positive");
    require(window > 0, "window must be positive");
    require(seq_layers > 0 && seq_heads > 0, "sequence encoder needs layers and heads");
    require(seq_dim % seq_heads == 0, "seq_dim must be divisible by seq_heads");
    require(!gat_heads.empty(), "graph encoder needs at least one layer");
    for (const auto h : gat_heads)
        require(h > 0 && graph_dim % h == 0, "graph_dim must be divisible by every layer's head count");
    require(block_dim == graph_dim, "block_dim must equal graph_dim");
    require(alpha > 0 && clip_cap > 0, "alpha and clip_cap must be positive");
    require(m_max > 0 && pool_hidden > 0, "m_max and pool_hidden must be positive");
    require(random_features > 0 && seq_ff_dim > 0, "random_features and seq_ff_dim must be positive");
    require(m_max <= (1u << 24), "m_max too large");
}

Mat orthogonal_features(std::size_t rows, std::size_t dim, Rng& rng)
{
    Mat out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
    const auto d = static_cast<Eigen::Index>(dim);
    Eigen::Index filled = 0;
    while (filled < out.rows())
    {
        linalg::Matrix<double> g(d, d);
        for (Eigen::Index i = 0; i < g.size(); ++i)
            g.data()[i] = rng.normal();
        const linalg::Matrix<double> q = Eigen::HouseholderQR<linalg::Matrix<double>>(g).householderQ();
        const Eigen::Index take = std::min(d, out.rows() - filled);
        for (Eigen::Index i = 0; i < take; ++i)
        {
            // Scale orthonormal rows to the norm of an independent Gaussian.
            double norm2 = 0;
            for (Eigen::Index j = 0; j < d; ++j)
            {
                const double x = rng.normal();
                norm2 += x * x;
            }
            out.row(filled + i) = (q.col(i) * std::sqrt(norm2)).transpose().cast<float>();
        }
        filled += take;
    }
    return out;
}

EncoderParams make_params(const EmbeddingConfig& config)
{
    config.validate();
    Rng rng{config.seed};
    EncoderParams p;
    p.seed = config.seed;
    const auto ds = config.seq_dim;
    const auto head_dim = ds / config.seq_heads;

    p.input = uniform_matrix(config.word_dim, ds, rng);
    p.input_bias = zeros(ds);
    for (std::size_t l = 0; l < config.seq_layers; ++l)
    {
        SequenceLayerParams layer;
        layer.wq = uniform_matrix(ds, ds, rng);
        layer.wk = uniform_matrix(ds, ds, rng);
        layer.wv = uniform_matrix(ds, ds, rng);
        layer.wo = uniform_matrix(ds, ds, rng);
        for (std::size_t h = 0; h < config.seq_heads; ++h)
            layer.features.push_back(orthogonal_features(config.random_features, head_dim, rng));
        layer.ln1_gain = ones(ds);
        layer.ln1_bias = zeros(ds);
        layer.ff1 = uniform_matrix(ds, config.seq_ff_dim, rng);
        layer.ff1_bias = zeros(config.seq_ff_dim);
        layer.ff2 = uniform_matrix(config.seq_ff_dim, ds, rng);
        layer.ff2_bias = zeros(ds);
        layer.ln2_gain = ones(ds);
        layer.ln2_bias = zeros(ds);
        p.layers.push_back(std::move(layer));
    }

    std::size_t in_dim = ds;
    for (std::size_t l = 0; l < config.gat_heads.size(); ++l)
    {
        GatLayerParams g;
        g.heads = config.gat_heads[l];
        g.concat = l + 1 < config.gat_heads.size();
        g.head_dim = g.concat ? config.graph_dim / g.heads : config.graph_dim;
        g.w = uniform_matrix(in_dim, g.heads * g.head_dim, rng);
        const double bound = 1.0 / std::sqrt(static_cast<double>(g.head_dim));
        g.a_src = Mat(static_cast<Eigen::Index>(g.heads), static_cast<Eigen::Index>(g.head_dim));
        g.a_dst = g.a_src;
        for (Eigen::Index i = 0; i < g.a_src.size(); ++i)
            g.a_src.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
        for (Eigen::Index i = 0; i < g.a_dst.size(); ++i)
            g.a_dst.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
        in_dim = g.concat ? g.heads * g.head_dim : g.head_dim;
        p.gat.push_back(std::move(g));
    }

    p.pool.w = uniform_matrix(config.graph_dim, config.pool_hidden, rng).transpose();
    p.pool.a = uniform_vector(config.pool_hidden, config.pool_hidden, rng);
    p.word_to_seq = uniform_matrix(config.word_dim, ds, rng);
    p.seq_to_block = uniform_matrix(ds, config.block_dim, rng);
    return p;
}

bool EncoderParams::operator==(const EncoderParams& o) const
{
    if (seed != o.seed || layers.size() != o.layers.size() || gat.size() != o.gat.size())
        return false;
    if (!same(input, o.input) || !same(input_bias, o.input_bias) || !same(pool.w, o.pool.w) ||
        !same(pool.a, o.pool.a) || !same(word_to_seq, o.word_to_seq) || !same(seq_to_block, o.seq_to_block))
        return false;
    for (std::size_t l = 0; l < layers.size(); ++l)
    {
        const auto& a = layers[l];
        const auto& b = o.layers[l];
        if (!same(a.wq, b.wq) || !same(a.wk, b.wk) || !same(a.wv, b.wv) || !same(a.wo, b.wo) ||
            !same(a.ln1_gain, b.ln1_gain) || !same(a.ln1_bias, b.ln1_bias) || !same(a.ff1, b.ff1) ||
            !same(a.ff1_bias, b.ff1_bias) || !same(a.ff2, b.ff2) || !same(a.ff2_bias, b.ff2_bias) ||
            !same(a.ln2_gain, b.ln2_gain) || !same(a.ln2_bias, b.ln2_bias) || a.features.size() != b.features.size())
            return false;
        for (std::size_t h = 0; h < a.features.size(); ++h)
            if (!same(a.features[h], b.features[h]))
                return false;
    }
    for (std::size_t l = 0; l < gat.size(); ++l)
    {
        const auto& a = gat[l];
        const auto& b = o.gat[l];
        if (a.heads != b.heads || a.head_dim != b.head_dim || a.concat != b.concat || !same(a.w, b.w) ||
            !same(a.a_src, b.a_src) || !same(a.a_dst, b.a_dst))
            return false;
    }
    return true;
}

void EncoderParams::save(const std::filesystem::path& path) const
{
    io::Writer w;
    w.raw(params_magic, 4);
    w.put(params_version);
    w.put(seed);
    w.put(static_cast<std::uint32_t>(layers.size()));
    w.put(static_cast<std::uint32_t>(gat.size()));
    w.matrix(input);
    w.vector(input_bias);
    for (const auto& l : layers)
    {
        for (const auto* m : {&l.wq, &l.wk, &l.wv, &l.wo})
            w.matrix(*m);
        w.put(static_cast<std::uint32_t>(l.features.size()));
        for (const auto& f : l.features)
            w.matrix(f);
        w.vector(l.ln1_gain);
        w.vector(l.ln1_bias);
        w.matrix(l.ff1);
        w.vector(l.ff1_bias);
        w.matrix(l.ff2);
        w.vector(l.ff2_bias);
        w.vector(l.ln2_gain);
        w.vector(l.ln2_bias);
    }
    for (const auto& g : gat)
    {
        w.put(static_cast<std::uint32_t>(g.heads));
        w.put(static_cast<std::uint32_t>(g.head_dim));
        w.put(static_cast<std::uint8_t>(g.concat));
        w.matrix(g.w);
        w.matrix(g.a_src);
        w.matrix(g.a_dst);
    }
    w.matrix(pool.w);
    w.vector(pool.a);
    w.matrix(word_to_seq);
    w.matrix(seq_to_block);
    io::write_file(path, w.data());
}

EncoderParams EncoderParams::load(const std::filesystem::path& path)
{
    const auto data = io::read_file(path);
    try
    {
        io::Reader r{data};
        if (std::string_view{r.take(4), 4} != std::string_view{params_magic, 4})
            throw FormatError{"not a parameter file"};
        if (r.get<std::uint16_t>() != params_version)
            throw FormatError{"unsupported parameter file version"};
        EncoderParams p;
        p.seed = r.get<std::uint64_t>();
        const auto n_layers = r.get<std::uint32_t>();
        const auto n_gat = r.get<std::uint32_t>();
        if (n_layers > 1024 || n_gat > 1024)
            throw FormatError{"implausible layer count"};
        p.input = r.matrix();
        p.input_bias = r.vector();
        for (std::uint32_t i = 0; i < n_layers; ++i)
        {
            SequenceLayerParams l;
            for (auto* m : {&l.wq, &l.wk, &l.wv, &l.wo})
                *m = r.matrix();
            const auto n_feat = r.get<std::uint32_t>();
            if (n_feat > 1024)
                throw FormatError{"implausible head count"};
            for (std::uint32_t h = 0; h < n_feat; ++h)
                l.features.push_back(r.matrix());
            l.ln1_gain = r.vector();
            l.ln1_bias = r.vector();
            l.ff1 = r.matrix();
            l.ff1_bias = r.vector();
            l.ff2 = r.matrix();
            l.ff2_bias = r.vector();
            l.ln2_gain = r.vector();
            l.ln2_bias = r.vector();
            p.layers.push_back(std::move(l));
        }
        for (std::uint32_t i = 0; i < n_gat; ++i)
        {
            GatLayerParams g;
            g.heads = r.get<std::uint32_t>();
            g.head_dim = r.get<std::uint32_t>();
            g.concat = r.get<std::uint8_t>() != 0;
            g.w = r.matrix();
            g.a_src = r.matrix();
            g.a_dst = r.matrix();
            p.gat.push_back(std::move(g));
        }
        p.pool.w = r.matrix();
        p.pool.a = r.vector();
        p.word_to_seq = r.matrix();
        p.seq_to_block = r.matrix();
        if (r.remaining() != 0)
            throw FormatError{"trailing bytes in parameter file"};
        return p;
    }
    catch (const io::ShortRead& e)
    {
        throw FormatError{std::string{"truncated parameter file: "} + e.what()};
    }
}

}  // namespace deltascan::encoder
