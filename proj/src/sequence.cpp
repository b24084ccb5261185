// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <deltascan/encoder.hpp>

#include <cmath>
#include <numeric>

namespace deltascan::encoder
{
namespace
{
using ColMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

/// Hyperbolic positive random features exp(+-w.x - |x|^2/2) of `x * scale`
/// for stacked segments. Rows are computed relative to their own peak;
/// key rows are then rescaled relative to the peak of their segment. Row
/// shifts of query features and the 1/sqrt(2r) factor cancel in the
/// attention normalizer.
ColMat positive_features(const MatRef& x, const Mat& omega, float scale, std::span<const std::size_t> lengths,
    bool query)
{
    const auto r = omega.rows();
    const ColMat xs = x * scale;
    ColMat phi(x.rows(), 2 * r);
    phi.leftCols(r).noalias() = xs * omega.transpose();
    const Eigen::VectorXf peak = phi.leftCols(r).cwiseAbs().rowwise().maxCoeff();
    const Eigen::ArrayXf shift = peak.array();
    if (peak.size() > 0 && peak.maxCoeff() < 40.0f)
    {
        // exp(-p - peak) == exp(-2 peak) / exp(p - peak) without underflow here.
        const Eigen::ArrayXf corner = (-2.0f * shift).exp();
        for (Eigen::Index c = 0; c < r; ++c)
        {
            auto plus = phi.col(c).array();
            plus = (plus - shift).exp();
            phi.col(r + c).array() = corner / plus;
        }
    }
    else
    {
        for (Eigen::Index c = 0; c < r; ++c)
        {
            auto plus = phi.col(c).array();
            phi.col(r + c).array() = (-plus - shift).exp();
            plus = (plus - shift).exp();
        }
    }
    if (!query)
    {
        const Eigen::VectorXf top = peak - 0.5f * xs.rowwise().squaredNorm();
        Eigen::Index off = 0;
        for (const auto len : lengths)
        {
            const auto n = static_cast<Eigen::Index>(len);
            if (n > 0)
            {
                const float seg_top = top.segment(off, n).maxCoeff();
                const Eigen::ArrayXf w = (top.segment(off, n).array() - seg_top).exp();
                for (Eigen::Index c = 0; c < 2 * r; ++c)
                    phi.col(c).segment(off, n).array() *= w;
            }
            off += n;
        }
    }
    return phi;
}

/// Features of one row from its projections `p` and peak |p|, shifted by
/// the peak so the largest feature is 1.
template <class P, class Phi>
void row_features(const P& p, float peak, Phi& phi)
{
    const auto r = p.size();
    phi.head(r).array() = (p.array() - peak).exp();
    if (peak < 40.0f)
        phi.tail(r).array() = std::exp(-2.0f * peak) / phi.head(r).array();
    else
        phi.tail(r).array() = (-p.array() - peak).exp();
}

constexpr int twice(int n) { return n == Eigen::Dynamic ? Eigen::Dynamic : 2 * n; }
constexpr int plus_one(int n) { return n == Eigen::Dynamic ? Eigen::Dynamic : n + 1; }

/// Random-feature attention over each segment independently, written to
/// the rows of `out`. Keys are folded into a (dv + 1) x 2r summary whose
/// extra row accumulates the normalizer; queries then read it four rows at
/// a time. R and D fix the feature count and head width at compile time
/// when known.
template <int R, int D, class Out>
void favor_kernel(const MatRef& q, const MatRef& k, const MatRef& v, const Mat& omega,
    std::span<const std::size_t> lengths, Out&& out)
{
    using Proj = Eigen::Matrix<float, D, R, Eigen::RowMajor>;
    using Row = Eigen::Matrix<float, 1, R>;
    using Features = Eigen::Matrix<float, 1, twice(R)>;
    using Summary = Eigen::Matrix<float, plus_one(D), twice(R), Eigen::RowMajor>;

    const auto r = omega.rows();
    const auto d = q.cols();
    const auto dv = v.cols();
    const float scale = 1.0f / std::pow(static_cast<float>(d), 0.25f);
    const Proj omega_t = omega.transpose() * scale;
    const float half_sq = 0.5f * scale * scale;

    const std::size_t longest = lengths.empty() ? 0 : *std::max_element(lengths.begin(), lengths.end());
    Eigen::Matrix<float, Eigen::Dynamic, R, Eigen::RowMajor> proj(static_cast<Eigen::Index>(longest), r);
    Eigen::VectorXf peak(static_cast<Eigen::Index>(longest));
    Eigen::VectorXf top(static_cast<Eigen::Index>(longest));
    Summary kvz(dv + 1, 2 * r);
    Features phi(2 * r);
    Eigen::Matrix<float, 4, twice(R), Eigen::RowMajor> quad(4, 2 * r);
    Row p(r);

    Eigen::Index off = 0;
    for (const auto len : lengths)
    {
        const auto n = static_cast<Eigen::Index>(len);
        proj.topRows(n).noalias() = k.middleRows(off, n) * omega_t;
        for (Eigen::Index t = 0; t < n; ++t)
        {
            peak[t] = proj.row(t).cwiseAbs().maxCoeff();
            top[t] = peak[t] - half_sq * k.row(off + t).squaredNorm();
        }
        const float seg_top = n > 0 ? top.head(n).maxCoeff() : 0.0f;
        kvz.setZero();
        Eigen::Index t = 0;
        for (; t + 4 <= n; t += 4)
        {
            for (Eigen::Index i = 0; i < 4; ++i)
            {
                p = proj.row(t + i);
                auto row = quad.row(i);
                row_features(p, peak[t + i], row);
                row *= std::exp(top[t + i] - seg_top);
            }
            for (Eigen::Index c = 0; c < dv; ++c)
                kvz.row(c) += v(off + t, c) * quad.row(0) + v(off + t + 1, c) * quad.row(1) +
                    v(off + t + 2, c) * quad.row(2) + v(off + t + 3, c) * quad.row(3);
            kvz.row(dv) += quad.row(0) + quad.row(1) + quad.row(2) + quad.row(3);
        }
        for (; t < n; ++t)
        {
            p = proj.row(t);
            row_features(p, peak[t], phi);
            phi *= std::exp(top[t] - seg_top);
            for (Eigen::Index c = 0; c < dv; ++c)
                kvz.row(c) += v(off + t, c) * phi;
            kvz.row(dv) += phi;
        }
        const auto emit = [&](Eigen::Index row, const auto& num) {
            if (num[dv] > 0)
                out.row(row) = num.head(dv) / num[dv];
            else
                out.row(row).setZero();
        };
        proj.topRows(n).noalias() = q.middleRows(off, n) * omega_t;
        t = 0;
        for (; t + 4 <= n; t += 4)
        {
            for (Eigen::Index i = 0; i < 4; ++i)
            {
                p = proj.row(t + i);
                auto row = quad.row(i);
                row_features(p, p.cwiseAbs().maxCoeff(), row);
            }
            const Eigen::Matrix<float, 4, plus_one(D), Eigen::RowMajor> num = quad.lazyProduct(kvz.transpose());
            for (Eigen::Index i = 0; i < 4; ++i)
                emit(off + t + i, num.row(i));
        }
        for (; t < n; ++t)
        {
            p = proj.row(t);
            row_features(p, p.cwiseAbs().maxCoeff(), phi);
            const Eigen::Matrix<float, 1, plus_one(D)> num = phi.lazyProduct(kvz.transpose());
            emit(off + t, num);
        }
        off += n;
    }
}

template <class Out>
void favor_segments(const MatRef& q, const MatRef& k, const MatRef& v, const Mat& omega,
    std::span<const std::size_t> lengths, Out&& out)
{
    if (q.cols() == 12 && v.cols() == 12 && omega.rows() == 96)
        favor_kernel<96, 12>(q, k, v, omega, lengths, out);
    else if (q.cols() == 12 && v.cols() == 12 && omega.rows() == 128)
        favor_kernel<128, 12>(q, k, v, omega, lengths, out);
    else
        favor_kernel<Eigen::Dynamic, Eigen::Dynamic>(q, k, v, omega, lengths, out);
}

float qk_scale(Eigen::Index d)
{
    return 1.0f / std::pow(static_cast<float>(d), 0.25f);
}

Mat positional_encoding(std::size_t len, std::size_t dim)
{
    Mat pe(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(dim));
    for (std::size_t t = 0; t < len; ++t)
        for (std::size_t i = 0; i < dim; ++i)
        {
            const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
            const double angle = static_cast<double>(t) * freq;
            pe(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
                static_cast<float>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    return pe;
}

}  // namespace

Mat favor_attention_matrix(const MatRef& q, const MatRef& k, const Mat& omega)
{
    const float scale = qk_scale(q.cols());
    const std::size_t len[] = {static_cast<std::size_t>(k.rows())};
    const ColMat pq = positive_features(q, omega, scale, {}, true);
    const ColMat pk = positive_features(k, omega, scale, len, false);
    Mat a = pq * pk.transpose();
    const Vec rows = a.rowwise().sum();
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        if (rows[i] > 0)
            a.row(i) /= rows[i];
    return a;
}

Mat favor_attention(const MatRef& q, const MatRef& k, const MatRef& v, const Mat& omega)
{
    if (q.rows() != k.rows() || k.rows() != v.rows())
        throw DimensionMismatch{"attention inputs differ in length"};
    Mat out(q.rows(), v.cols());
    const std::size_t len[] = {static_cast<std::size_t>(q.rows())};
    favor_segments(q, k, v, omega, len, out);
    return out;
}

Mat softmax_attention_matrix(const MatRef& q, const MatRef& k)
{
    Mat s = (q * k.transpose()) / std::sqrt(static_cast<float>(q.cols()));
    for (Eigen::Index i = 0; i < s.rows(); ++i)
        s.row(i) = linalg::softmax(s.row(i).transpose()).transpose();
    return s;
}

PathEmbedding embed_path(std::span<const std::string> tokens, const Vocabulary& vocab, const EmbeddingConfig& config,
    std::atomic<std::uint64_t>* truncations, std::size_t path_index)
{
    if (vocab.size() > 0 && vocab.dim() != config.word_dim)
        throw DimensionMismatch{"vocabulary dimension differs from word_dim"};
    PathEmbedding p;
    p.path_index = path_index;
    p.valid_len = std::min(tokens.size(), config.m_max);
    if (tokens.size() > config.m_max && truncations)
        truncations->fetch_add(1, std::memory_order_relaxed);
    p.v = Mat::Zero(static_cast<Eigen::Index>(config.m_max), static_cast<Eigen::Index>(config.word_dim));
    p.mask.assign(config.m_max, false);
    for (std::size_t t = 0; t < p.valid_len; ++t)
    {
        const int id = vocab.index_of(tokens[t]);
        if (id >= 0)
            p.v.row(static_cast<Eigen::Index>(t)) = vocab.vectors().row(id);
        p.mask[t] = true;
    }
    return p;
}

Mat encode_packed(const Mat& x, std::span<const std::size_t> lengths, const EncoderParams& params,
    const EmbeddingConfig& config)
{
    if (static_cast<std::size_t>(x.cols()) != config.word_dim ||
        static_cast<std::size_t>(params.input.rows()) != config.word_dim ||
        static_cast<std::size_t>(params.input.cols()) != config.seq_dim)
        throw DimensionMismatch{"sequence input has the wrong width"};
    if (std::accumulate(lengths.begin(), lengths.end(), std::size_t{0}) != static_cast<std::size_t>(x.rows()))
        throw DimensionMismatch{"sequence lengths do not partition the input"};
    if (params.layers.size() != config.seq_layers)
        throw DimensionMismatch{"parameter layer count differs from config"};

    const auto ds = static_cast<Eigen::Index>(config.seq_dim);
    const auto heads = static_cast<Eigen::Index>(config.seq_heads);
    const auto dh = ds / heads;
    const auto total = x.rows();
    const std::size_t longest = lengths.empty() ? 0 : *std::max_element(lengths.begin(), lengths.end());
    const Mat pe = positional_encoding(longest, config.seq_dim);

    Mat h = x * params.input;
    h.rowwise() += params.input_bias.transpose();
    {
        Eigen::Index off = 0;
        for (const auto len : lengths)
        {
            const auto n = static_cast<Eigen::Index>(len);
            h.middleRows(off, n) += pe.topRows(n);
            off += n;
        }
    }

    Mat qkv, att(total, ds), tmp, wqkv(ds, 3 * ds), seg;
    for (const auto& layer : params.layers)
    {
        wqkv << layer.wq, layer.wk, layer.wv;
        qkv.noalias() = h * wqkv;
        // Segment by segment keeps the feature matrices in cache.
        Eigen::Index off = 0;
        for (const auto len : lengths)
        {
            const auto n = static_cast<Eigen::Index>(len);
            const std::size_t one[] = {len};
            seg = qkv.middleRows(off, n);
            for (Eigen::Index hd = 0; hd < heads; ++hd)
                favor_segments(seg.middleCols(hd * dh, dh), seg.middleCols(ds + hd * dh, dh),
                    seg.middleCols(2 * ds + hd * dh, dh), layer.features[static_cast<std::size_t>(hd)], one,
                    att.block(off, hd * dh, n, dh));
            off += n;
        }
        h.noalias() += att * layer.wo;
        linalg::layer_norm_rows(h, layer.ln1_gain, layer.ln1_bias);
        tmp.noalias() = h * layer.ff1;
        tmp.rowwise() += layer.ff1_bias.transpose();
        tmp = linalg::relu(tmp);
        h.noalias() += tmp * layer.ff2;
        h.rowwise() += layer.ff2_bias.transpose();
        linalg::layer_norm_rows(h, layer.ln2_gain, layer.ln2_bias);
    }
    return h;
}

std::vector<Mat> encode_sequences(
    const std::vector<PathEmbedding>& batch, const EncoderParams& params, const EmbeddingConfig& config)
{
    std::vector<std::size_t> lengths;
    std::size_t total = 0;
    for (const auto& p : batch)
    {
        if (static_cast<std::size_t>(p.v.rows()) != config.m_max ||
            static_cast<std::size_t>(p.v.cols()) != config.word_dim || p.mask.size() != config.m_max)
            throw DimensionMismatch{"path embedding must be m_max x word_dim"};
        const auto valid = static_cast<std::size_t>(std::count(p.mask.begin(), p.mask.end(), true));
        if (!std::all_of(p.mask.begin(), p.mask.begin() + static_cast<std::ptrdiff_t>(valid), [](bool b) { return b; }))
            throw ShapeMismatch{"mask must be a prefix of valid rows"};
        lengths.push_back(valid);
        total += valid;
    }
    Mat packed(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(config.word_dim));
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < batch.size(); ++i)
    {
        const auto n = static_cast<Eigen::Index>(lengths[i]);
        packed.middleRows(off, n) = batch[i].v.topRows(n);
        off += n;
    }
    const Mat h = encode_packed(packed, lengths, params, config);
    std::vector<Mat> out;
    off = 0;
    for (std::size_t i = 0; i < batch.size(); ++i)
    {
        const auto n = static_cast<Eigen::Index>(lengths[i]);
        Mat slice = Mat::Zero(static_cast<Eigen::Index>(config.m_max), static_cast<Eigen::Index>(config.seq_dim));
        slice.topRows(n) = h.middleRows(off, n);
        out.push_back(std::move(slice));
        off += n;
    }
    return out;
}

}  // namespace deltascan::encoder
