// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "oracle/gat_reference.hpp"
#include "support/graphs.hpp"

#include <deltascan/encoder.hpp>

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <random>

using namespace deltascan;
using namespace deltascan::encoder;

namespace
{
EmbeddingConfig small_config()
{
    EmbeddingConfig c;
    c.m_max = 32;
    return c;
}

std::vector<std::vector<std::string>> toy_corpus()
{
    return {{"PUSH1", "PUSH1", "ADD", "SSTORE", "STOP"}, {"JUMPDEST", "CALLER", "SLOAD", "JUMP"},
        {"JUMPDEST", "STOP"}, {"PUSH0", "PUSH32", "MSTORE", "RETURN"}};
}

const Vocabulary& toy_vocab()
{
    static const Vocabulary v = train_vocabulary(toy_corpus(), EmbeddingConfig{});
    return v;
}

const EncoderParams& default_params()
{
    static const EncoderParams p = make_params(EmbeddingConfig{});
    return p;
}

std::filesystem::path temp_file(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("deltascan_test_" + name);
}

double pearson(const Mat& a, const Mat& b)
{
    const auto n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
    {
        ma += a.data()[i];
        mb += b.data()[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
    {
        const double x = a.data()[i] - ma, y = b.data()[i] - mb;
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    return sab / std::sqrt(saa * sbb);
}

/// softmax(q k^T / sqrt(d)) in double.
Eigen::MatrixXd exact_attention(const Mat& q, const Mat& k)
{
    const Eigen::MatrixXd qd = q.cast<double>(), kd = k.cast<double>();
    Eigen::MatrixXd s = qd * kd.transpose() / std::sqrt(static_cast<double>(q.cols()));
    for (Eigen::Index i = 0; i < s.rows(); ++i)
    {
        const double m = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - m).exp();
        s.row(i) /= s.row(i).sum();
    }
    return s;
}

Mat gaussian(Eigen::Index rows, Eigen::Index cols, double sd, std::mt19937_64& rng)
{
    std::normal_distribution<float> dist(0.0f, static_cast<float>(sd));
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = dist(rng);
    return m;
}

}  // namespace

TEST_CASE("config validation")
{
    CHECK_NOTHROW(EmbeddingConfig{}.validate());
    auto c = EmbeddingConfig{};
    c.seq_heads = 7;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = EmbeddingConfig{};
    c.gat_heads = {8, 3, 1};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = EmbeddingConfig{};
    c.word_dim = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = EmbeddingConfig{};
    c.m_max = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("vocabulary")
{
    SUBCASE("single-token corpus")
    {
        const auto v = train_vocabulary({{"STOP"}}, EmbeddingConfig{});
        REQUIRE(v.size() == 1);
        CHECK(v.index_of("STOP") == 0);
        CHECK(v.lookup("STOP").size() == 64);
    }
    SUBCASE("unknown tokens map to zero")
    {
        const auto z = toy_vocab().lookup("NOT_AN_OPCODE");
        CHECK(z.size() == 64);
        CHECK(z.isZero(0.0f));
        CHECK(toy_vocab().index_of("NOT_AN_OPCODE") == -1);
    }
    SUBCASE("deterministic under the seed")
    {
        const auto a = train_vocabulary(toy_corpus(), EmbeddingConfig{});
        const auto b = train_vocabulary(toy_corpus(), EmbeddingConfig{});
        CHECK(a == b);
        CHECK(std::memcmp(a.vectors().data(), b.vectors().data(), sizeof(float) * a.vectors().size()) == 0);
        auto other = EmbeddingConfig{};
        other.seed = 7;
        CHECK_FALSE(train_vocabulary(toy_corpus(), other) == a);
    }
    SUBCASE("trained vectors are finite and distinct")
    {
        const auto& v = toy_vocab();
        CHECK(v.vectors().allFinite());
        CHECK(v.lookup("ADD") != v.lookup("STOP"));
    }
    SUBCASE("empty corpus")
    {
        CHECK_THROWS_AS(train_vocabulary({}, EmbeddingConfig{}), EmptyCorpus);
        CHECK_THROWS_AS(train_vocabulary({{}, {}}, EmbeddingConfig{}), EmptyCorpus);
    }
    SUBCASE("coverage")
    {
        CHECK(toy_vocab().coverage(toy_corpus()) == doctest::Approx(1.0));
        CHECK(toy_vocab().coverage({{"STOP", "NOPE"}}) == doctest::Approx(0.5));
    }
    SUBCASE("corpus hash tracks content")
    {
        CHECK(toy_vocab().training_corpus_hash() == corpus_hash(toy_corpus()));
        CHECK(corpus_hash({{"A", "B"}}) != corpus_hash({{"A"}, {"B"}}));
    }
    SUBCASE("save and load")
    {
        const auto path = temp_file("vocab.bin");
        toy_vocab().save(path);
        const auto back = Vocabulary::load(path);
        CHECK(back == toy_vocab());
        CHECK(back.training_corpus_hash() == toy_vocab().training_corpus_hash());
        std::filesystem::resize_file(path, 20);
        CHECK_THROWS_AS(Vocabulary::load(path), FormatError);
        std::filesystem::remove(path);
    }
}

TEST_CASE("encoder parameters")
{
    const auto& p = default_params();
    CHECK(p == make_params(EmbeddingConfig{}));
    auto other = EmbeddingConfig{};
    other.seed = 43;
    CHECK_FALSE(p == make_params(other));

    REQUIRE(p.layers.size() == 6);
    CHECK(p.layers[0].features.size() == 8);
    CHECK(p.gat.size() == 3);
    CHECK(p.gat[0].heads == 8);
    CHECK(p.gat[2].heads == 1);
    CHECK(p.gat[2].head_dim == 128);
    CHECK(p.gat[0].w.rows() == 96);
    CHECK(p.pool.w.rows() == 64);
    CHECK(p.pool.w.cols() == 128);

    const auto path = temp_file("params.bin");
    p.save(path);
    CHECK(EncoderParams::load(path) == p);
    std::filesystem::remove(path);
}

TEST_CASE("orthogonal features")
{
    Rng rng{42};
    const Mat w = orthogonal_features(40, 12, rng);
    REQUIRE(w.rows() == 40);
    REQUIRE(w.cols() == 12);
    for (Eigen::Index blk = 0; blk + 12 <= 40; blk += 12)
    {
        const Mat b = w.middleRows(blk, 12);
        const RowVec norms = b.rowwise().norm().transpose();
        Mat unit = b;
        for (Eigen::Index i = 0; i < 12; ++i)
            unit.row(i) /= norms(i);
        CHECK((unit * unit.transpose() - Mat::Identity(12, 12)).cwiseAbs().maxCoeff() < 1e-4f);
    }
}

TEST_CASE("embed_path")
{
    auto c = EmbeddingConfig{};
    c.m_max = 4;
    const std::vector<std::string> tokens{"PUSH1", "ADD"};
    const auto p = embed_path(tokens, toy_vocab(), c);
    CHECK(p.v.rows() == 4);
    CHECK(p.v.cols() == 64);
    CHECK(p.valid_len == 2);
    CHECK(p.mask == std::vector<bool>{true, true, false, false});
    CHECK(p.v.row(0) == toy_vocab().lookup("PUSH1"));
    CHECK(p.v.row(1) == toy_vocab().lookup("ADD"));
    CHECK(p.v.bottomRows(2).isZero(0.0f));

    const auto empty = embed_path({}, toy_vocab(), c);
    CHECK(empty.valid_len == 0);
    CHECK(empty.v.isZero(0.0f));
    CHECK(std::none_of(empty.mask.begin(), empty.mask.end(), [](bool b) { return b; }));

    std::atomic<std::uint64_t> truncated{0};
    std::vector<std::string> longer(c.m_max + 10, "ADD");
    const auto t = embed_path(longer, toy_vocab(), c, &truncated);
    CHECK(t.valid_len == c.m_max);
    CHECK(truncated.load() == 1);
    embed_path(tokens, toy_vocab(), c, &truncated);
    CHECK(truncated.load() == 1);
}

TEST_CASE("linear attention fidelity")
{
    // q, k ~ N(0, 0.5^2), head width 12, lengths 2..32, default feature count.
    const auto r = EmbeddingConfig{}.random_features;
    double total = 0;
    double worst_row = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
    {
        std::mt19937_64 gen{seed};
        const auto len = static_cast<Eigen::Index>(2 + gen() % 31);
        const Mat q = gaussian(len, 12, 0.5, gen);
        const Mat k = gaussian(len, 12, 0.5, gen);
        Rng rng{seed};
        const Mat omega = orthogonal_features(r, 12, rng);
        const Mat approx = favor_attention_matrix(q, k, omega);
        const Mat exact = exact_attention(q, k).cast<float>();
        for (Eigen::Index i = 0; i < len; ++i)
            worst_row = std::max(worst_row, std::abs(approx.row(i).cast<double>().sum() - 1.0));
        CHECK(approx.minCoeff() > 0.0f);
        total += pearson(approx, exact);
    }
    CHECK(worst_row <= 1e-6);
    CHECK(total / 100.0 >= 0.9);
}

TEST_CASE("exact softmax attention")
{
    std::mt19937_64 gen{5};
    const Mat q = gaussian(9, 12, 1.0, gen), k = gaussian(9, 12, 1.0, gen);
    const Mat got = softmax_attention_matrix(q, k);
    CHECK((got.cast<double>() - exact_attention(q, k)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("attention applied to values matches the explicit matrix")
{
    for (const auto& [r, d] : std::vector<std::pair<std::size_t, Eigen::Index>>{{96, 12}, {128, 12}, {40, 12}, {16, 8}})
    {
        CAPTURE(r);
        CAPTURE(d);
        std::mt19937_64 gen{r * 31 + static_cast<std::uint64_t>(d)};
        Rng rng{r};
        const Mat omega = orthogonal_features(r, static_cast<std::size_t>(d), rng);
        for (const Eigen::Index len : {1, 7, 33})
        {
            const Mat q = gaussian(len, d, 0.6, gen), k = gaussian(len, d, 0.6, gen), v = gaussian(len, d, 1.0, gen);
            const Mat want = favor_attention_matrix(q, k, omega) * v;
            const Mat got = favor_attention(q, k, v, omega);
            CHECK((got - want).cwiseAbs().maxCoeff() < 1e-4f);
        }
    }
    Rng rng{1};
    const Mat omega = orthogonal_features(16, 8, rng);
    CHECK_THROWS_AS(favor_attention(Mat::Zero(3, 8), Mat::Zero(4, 8), Mat::Zero(3, 8), omega), DimensionMismatch);
}

TEST_CASE("encode_sequences")
{
    const auto c = small_config();
    const auto params = make_params(c);
    const std::vector<std::string> a{"PUSH1", "PUSH1", "ADD", "SSTORE", "STOP"};
    const std::vector<std::string> b{"JUMPDEST", "CALLER", "SLOAD", "JUMP", "JUMPDEST", "STOP", "PUSH0"};

    SUBCASE("shape and identical paths")
    {
        const std::vector<PathEmbedding> batch{
            embed_path(a, toy_vocab(), c, nullptr, 0), embed_path(b, toy_vocab(), c, nullptr, 1),
            embed_path(a, toy_vocab(), c, nullptr, 2)};
        const auto h = encode_sequences(batch, params, c);
        REQUIRE(h.size() == 3);
        for (const auto& m : h)
        {
            CHECK(m.rows() == 32);
            CHECK(m.cols() == 96);
            CHECK(m.allFinite());
        }
        CHECK(h[0] == h[2]);
        CHECK(h[0].bottomRows(32 - 5).isZero(0.0f));
        CHECK_FALSE(h[0].topRows(5).isZero());
        CHECK(h == encode_sequences(batch, params, c));
    }
    SUBCASE("padding rows do not influence valid rows")
    {
        auto p = embed_path(b, toy_vocab(), c);
        const auto before = encode_sequences({p}, params, c);
        std::mt19937_64 gen{3};
        p.v.bottomRows(32 - 7) = gaussian(32 - 7, 64, 10.0, gen);
        const auto after = encode_sequences({p}, params, c);
        CHECK((before[0].topRows(7) - after[0].topRows(7)).cwiseAbs().maxCoeff() <= 1e-6f);
    }
    SUBCASE("batch composition does not matter")
    {
        const auto alone = encode_sequences({embed_path(b, toy_vocab(), c)}, params, c);
        const auto together =
            encode_sequences({embed_path(a, toy_vocab(), c), embed_path(b, toy_vocab(), c)}, params, c);
        CHECK((alone[0] - together[1]).cwiseAbs().maxCoeff() <= 1e-6f);
    }
    SUBCASE("errors")
    {
        auto p = embed_path(a, toy_vocab(), c);
        p.v = Mat::Zero(31, 64);
        CHECK_THROWS_AS(encode_sequences({p}, params, c), DimensionMismatch);
        auto gap = embed_path(a, toy_vocab(), c);
        gap.mask[1] = false;
        CHECK_THROWS_AS(encode_sequences({gap}, params, c), ShapeMismatch);
    }
}

TEST_CASE("fusion weights")
{
    const EmbeddingConfig c;
    SUBCASE("examples")
    {
        const std::uint32_t one[] = {7};
        CHECK(fusion_weights(one, 3.0, c) == std::vector<double>{1.0});
        const std::uint32_t same[] = {10, 10};
        const auto w = fusion_weights(same, 2.5, c);
        CHECK(w[0] == doctest::Approx(0.5));
        CHECK(w[1] == doctest::Approx(0.5));
    }
    SUBCASE("start and one average block later")
    {
        // a = (exp(0), exp(0.6)), w = softmax(a)
        const double a0 = 1.0, a1 = std::exp(0.6);
        const double w0 = std::exp(a0) / (std::exp(a0) + std::exp(a1));
        const std::uint32_t s[] = {0, 4};
        const auto w = fusion_weights(s, 4.0, c);
        CHECK(w[0] == doctest::Approx(w0).epsilon(1e-12));
        CHECK(w[1] == doctest::Approx(1.0 - w0).epsilon(1e-12));
        CHECK(std::abs(w[0] - 0.3053) < 1e-4);
        CHECK(std::abs(w[1] - 0.6947) < 1e-4);
    }
    SUBCASE("weight law")
    {
        std::mt19937_64 gen{11};
        for (int trial = 0; trial < 500; ++trial)
        {
            std::vector<std::uint32_t> s(1 + gen() % 12);
            for (auto& x : s)
                x = static_cast<std::uint32_t>(gen() % 200);
            const double avg = 0.5 + static_cast<double>(gen() % 100) / 10.0;
            const auto w = fusion_weights(s, avg, c);
            REQUIRE(w.size() == s.size());
            CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) <= 1e-9);
            for (std::size_t i = 0; i < s.size(); ++i)
            {
                CHECK(w[i] > 0);
                for (std::size_t j = 0; j < s.size(); ++j)
                    if (s[i] < s[j])
                        CHECK(w[i] <= w[j]);
            }
        }
    }
    SUBCASE("clip saturation")
    {
        const std::uint32_t s[] = {0, 50, 80, 1000};
        const auto w = fusion_weights(s, 10.0, c);
        CHECK(w[1] == w[2]);
        CHECK(w[2] == w[3]);
        CHECK(w[0] < w[1]);
    }
}

TEST_CASE("fuse_block")
{
    const EmbeddingConfig c;
    std::mt19937_64 gen{2};
    const Mat h1 = gaussian(3, 96, 1.0, gen), h2 = gaussian(3, 96, 1.0, gen);

    const std::vector<Occurrence> one{{h1, 5}};
    CHECK(fuse_block(one, 2.0, c) == h1);

    const std::vector<Occurrence> same{{h1, 0}, {h1, 9}};
    CHECK((fuse_block(same, 2.0, c) - h1).cwiseAbs().maxCoeff() < 1e-6f);

    const std::vector<Occurrence> pair{{h1, 0}, {h2, 3}};
    const Mat want = 0.3053f * h1 + 0.6947f * h2;
    CHECK((fuse_block(pair, 3.0, c) - want).cwiseAbs().maxCoeff() < 1e-4f * (1.0f + want.cwiseAbs().maxCoeff()));

    const std::vector<Occurrence> bad{{h1, 0}, {Mat::Zero(2, 96), 1}};
    CHECK_THROWS_AS(fuse_block(bad, 3.0, c), ShapeMismatch);
    CHECK_THROWS_AS(fuse_block(std::vector<Occurrence>{}, 3.0, c), std::invalid_argument);

    const Mat words = gaussian(4, 64, 1.0, gen);
    const auto& params = default_params();
    const Mat projected = words * params.word_to_seq;
    CHECK((fallback_block(words, params) - projected).cwiseAbs().maxCoeff() < 1e-6f);
}

TEST_CASE("instruction graph construction")
{
    auto fused_for = [](const cfg::FunctionCfg& f) {
        std::vector<Mat> out;
        float next = 0;
        for (const auto& b : f.blocks)
        {
            Mat m(static_cast<Eigen::Index>(b.instr_count()), 96);
            m.setConstant(next++);
            out.push_back(m);
        }
        return out;
    };

    SUBCASE("one block of three")
    {
        const auto f = testing::make_cfg({3}, {});
        const auto g = build_instruction_graph(f, fused_for(f));
        CHECK(g.node_count() == 3);
        CHECK(g.seq_edges.size() == 2);
        CHECK(g.cfg_edges.empty());
    }
    SUBCASE("two blocks")
    {
        const auto f = testing::make_cfg({2, 1}, {{0, 1}});
        const auto fused = fused_for(f);
        const auto g = build_instruction_graph(f, fused);
        CHECK(g.node_count() == 3);
        CHECK(g.seq_edges == std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}});
        CHECK(g.cfg_edges == std::vector<std::pair<std::uint32_t, std::uint32_t>>{{1, 2}});
        CHECK(g.block_offset == std::vector<std::uint32_t>{0, 2, 3});
        CHECK(g.nodes.row(2) == fused[1].row(0));
    }
    SUBCASE("diamond")
    {
        const auto f = testing::make_cfg({1, 1, 1, 1}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
        const auto g = build_instruction_graph(f, fused_for(f));
        CHECK(g.node_count() == 4);
        CHECK(g.seq_edges.empty());
        CHECK(g.cfg_edges.size() == 4);
    }
    SUBCASE("random graphs")
    {
        std::mt19937_64 gen{9};
        for (int trial = 0; trial < 100; ++trial)
        {
            std::vector<std::size_t> sizes(1 + gen() % 8);
            for (auto& s : sizes)
                s = 1 + gen() % 5;
            std::vector<std::pair<cfg::BlockId, cfg::BlockId>> edges;
            for (std::size_t e = 0; e < gen() % 12; ++e)
                edges.emplace_back(static_cast<cfg::BlockId>(gen() % sizes.size()),
                    static_cast<cfg::BlockId>(gen() % sizes.size()));
            const auto f = testing::make_cfg(sizes, edges);
            const auto g = build_instruction_graph(f, fused_for(f));
            CHECK(g.node_count() == std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
            for (const auto& e : g.seq_edges)
            {
                CHECK(e.second == e.first + 1);
                CHECK(std::find(g.cfg_edges.begin(), g.cfg_edges.end(), e) == g.cfg_edges.end());
            }
            for (const auto& [s, d] : g.cfg_edges)
            {
                CHECK(s < g.node_count());
                CHECK(d < g.node_count());
            }
        }
    }
    SUBCASE("row count must match")
    {
        const auto f = testing::make_cfg({2}, {});
        CHECK_THROWS_AS(build_instruction_graph(f, std::vector<Mat>{Mat::Zero(3, 96)}), ShapeMismatch);
    }
}

TEST_CASE("graph encoder")
{
    const EmbeddingConfig c;
    const auto& params = default_params();

    SUBCASE("three-node chain against the dense reference")
    {
        InstructionGraph g;
        g.nodes = Mat::Zero(3, 96);
        for (Eigen::Index i = 0; i < 3; ++i)
            g.nodes(i, i) = 1.0f;
        g.seq_edges = {{0, 1}, {1, 2}};
        const Mat got = encode_graph(g, params, c);
        const Eigen::MatrixXd want = oracle::dense_gat(g.nodes.cast<double>(), g.seq_edges, params, c.leaky_slope);
        REQUIRE(got.rows() == 3);
        REQUIRE(got.cols() == 128);
        CHECK((got.cast<double>() - want).cwiseAbs().maxCoeff() < 1e-5);
    }
    SUBCASE("isolated node")
    {
        InstructionGraph g;
        std::mt19937_64 gen{4};
        g.nodes = gaussian(1, 96, 1.0, gen);
        const Mat got = encode_graph(g, params, c);
        CHECK(got.allFinite());
        CHECK((got.cast<double>() - oracle::dense_gat(g.nodes.cast<double>(), {}, params, c.leaky_slope)).cwiseAbs().maxCoeff() <
              1e-5);
    }
    SUBCASE("random graphs against the dense reference")
    {
        std::mt19937_64 gen{8};
        for (int trial = 0; trial < 10; ++trial)
        {
            const auto n = static_cast<std::uint32_t>(1 + gen() % 9);
            InstructionGraph g;
            g.nodes = gaussian(n, 96, 1.0, gen);
            for (std::uint32_t e = 0; e < 2 * n; ++e)
                g.cfg_edges.emplace_back(static_cast<std::uint32_t>(gen() % n), static_cast<std::uint32_t>(gen() % n));
            auto all = g.cfg_edges;
            const Mat got = encode_graph(g, params, c);
            CHECK((got.cast<double>() - oracle::dense_gat(g.nodes.cast<double>(), all, params, c.leaky_slope)).cwiseAbs().maxCoeff() <
                  1e-4);
        }
    }
    SUBCASE("permutation equivariance")
    {
        std::mt19937_64 gen{6};
        const std::uint32_t n = 7;
        InstructionGraph g;
        g.nodes = gaussian(n, 96, 1.0, gen);
        for (std::uint32_t e = 0; e < 12; ++e)
            g.cfg_edges.emplace_back(static_cast<std::uint32_t>(gen() % n), static_cast<std::uint32_t>(gen() % n));
        std::vector<std::uint32_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0u);
        std::shuffle(perm.begin(), perm.end(), gen);
        InstructionGraph p;
        p.nodes.resize(n, 96);
        for (std::uint32_t i = 0; i < n; ++i)
            p.nodes.row(perm[i]) = g.nodes.row(i);
        for (const auto& [s, d] : g.cfg_edges)
            p.cfg_edges.emplace_back(perm[s], perm[d]);
        const Mat a = encode_graph(g, params, c);
        const Mat b = encode_graph(p, params, c);
        for (std::uint32_t i = 0; i < n; ++i)
            CHECK((a.row(i) - b.row(perm[i])).cwiseAbs().maxCoeff() < 1e-5f);
    }
    SUBCASE("errors")
    {
        InstructionGraph g;
        g.nodes = Mat::Zero(2, 50);
        CHECK_THROWS_AS(encode_graph(g, params, c), DimensionMismatch);
        g.nodes = Mat::Zero(2, 96);
        g.seq_edges = {{0, 5}};
        CHECK_THROWS(encode_graph(g, params, c));
    }
}

TEST_CASE("attention pooling")
{
    SUBCASE("two rows against a hand evaluation")
    {
        PoolParams pool;
        pool.w.resize(2, 3);
        pool.w << 0.5f, -1.0f, 0.25f, 1.5f, 0.0f, -0.75f;
        pool.a.resize(2);
        pool.a << 2.0f, -1.0f;
        Mat rows(2, 3);
        rows << 1.0f, 2.0f, -1.0f, 0.5f, -0.5f, 3.0f;

        double score[2];
        for (int i = 0; i < 2; ++i)
        {
            double s = 0;
            for (int h = 0; h < 2; ++h)
            {
                double pre = 0;
                for (int j = 0; j < 3; ++j)
                    pre += static_cast<double>(pool.w(h, j)) * rows(i, j);
                s += static_cast<double>(pool.a(h)) * std::tanh(pre);
            }
            score[i] = s;
        }
        const double m = std::max(score[0], score[1]);
        const double e0 = std::exp(score[0] - m), e1 = std::exp(score[1] - m);
        const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
        const Vec z = pool_block(rows, pool);
        for (int j = 0; j < 3; ++j)
            CHECK(std::abs(z(j) - (p0 * rows(0, j) + p1 * rows(1, j))) < 1e-6);
    }
    SUBCASE("identity cases and convexity")
    {
        const auto& pool = default_params().pool;
        std::mt19937_64 gen{12};
        const Mat single = gaussian(1, 128, 1.0, gen);
        CHECK((pool_block(single, pool).transpose() - single).cwiseAbs().maxCoeff() < 1e-6f);
        const Mat same = single.replicate(5, 1);
        CHECK((pool_block(same, pool).transpose() - single).cwiseAbs().maxCoeff() < 1e-5f);
        for (int trial = 0; trial < 50; ++trial)
        {
            const Mat rows = gaussian(1 + static_cast<Eigen::Index>(gen() % 8), 128, 2.0, gen);
            const Vec z = pool_block(rows, pool);
            CHECK(z.allFinite());
            for (Eigen::Index j = 0; j < 128; ++j)
            {
                CHECK(z(j) <= rows.col(j).maxCoeff() + 1e-5f);
                CHECK(z(j) >= rows.col(j).minCoeff() - 1e-5f);
            }
        }
    }
}

TEST_CASE("embed_function")
{
    const EmbeddingConfig c;
    const auto& params = default_params();
    const auto& vocab = toy_vocab();

    SUBCASE("single block")
    {
        const auto f = testing::make_cfg({3}, {});
        const auto paths = cfg::extract_paths(f);
        const auto e = embed_function(f, paths, vocab, params, c);
        CHECK(e.blocks.rows() == 1);
        CHECK(e.blocks.cols() == 128);
        CHECK(e.blocks.allFinite());
        CHECK(e.fallback_count() == 0);
        CHECK(e.function_id == f.function_id);
    }
    SUBCASE("deterministic")
    {
        const auto f = testing::make_cfg({2, 3, 1, 4}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 1}});
        const auto paths = cfg::extract_paths(f);
        const auto a = embed_function(f, paths, vocab, params, c);
        const auto b = embed_function(f, paths, vocab, make_params(c), c);
        CHECK(a == b);
        CHECK(std::memcmp(a.blocks.data(), b.blocks.data(), sizeof(float) * a.blocks.size()) == 0);
    }
    SUBCASE("unreached block falls back without touching the others")
    {
        auto f = testing::make_cfg({2, 3, 2}, {{0, 1}, {0, 2}});
        const auto paths = cfg::extract_paths(f, 1);
        REQUIRE(paths.paths.size() == 1);
        const auto a = embed_function(f, paths, vocab, params, c);
        CHECK(a.fallback == std::vector<bool>{false, false, true});
        CHECK(a.blocks.allFinite());

        auto g = f;
        for (auto& ins : g.blocks[2].instructions)
            ins.byte = evm::op::SLOAD;
        const auto b = embed_function(g, paths, vocab, params, c);
        CHECK(a.blocks.topRows(2) == b.blocks.topRows(2));
        CHECK(a.blocks.row(2) != b.blocks.row(2));
    }
    SUBCASE("stage toggles")
    {
        const auto f = testing::make_cfg({2, 3}, {{0, 1}});
        const auto paths = cfg::extract_paths(f);
        const auto full = embed_function(f, paths, vocab, params, c);
        const auto no_seq = embed_function(f, paths, vocab, params, c, {false, true});
        const auto no_graph = embed_function(f, paths, vocab, params, c, {true, false});
        CHECK(no_seq.blocks.cols() == 128);
        CHECK(no_graph.blocks.cols() == 128);
        CHECK(no_seq.blocks.allFinite());
        CHECK(no_graph.blocks.allFinite());
        CHECK_FALSE(no_seq.blocks == full.blocks);
        CHECK_FALSE(no_graph.blocks == full.blocks);
    }
    SUBCASE("truncated paths are counted")
    {
        auto small = c;
        small.m_max = 4;
        const auto f = testing::make_cfg({3, 3}, {{0, 1}});
        std::atomic<std::uint64_t> counter{0};
        const auto e = embed_function(f, cfg::extract_paths(f), vocab, make_params(small), small, {}, &counter);
        CHECK(e.truncated_paths == 1);
        CHECK(counter.load() == 1);
        CHECK(e.fallback == std::vector<bool>{false, true});
    }
    SUBCASE("empty function")
    {
        cfg::FunctionCfg empty;
        CHECK_THROWS_AS(embed_function(empty, {}, vocab, params, c), EmptyFunction);
    }
}
