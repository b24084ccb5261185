// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deltascan/cfg.hpp>
#include <deltascan/linalg.hpp>
#include <deltascan/rng.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace deltascan::encoder
{
using linalg::Mat;
using linalg::RowVec;
using linalg::Vec;
using MatRef = Eigen::Ref<const Mat>;

struct ConfigError : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};
struct DimensionMismatch : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};
struct ShapeMismatch : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};
struct EmptyCorpus : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};
struct EmptyFunction : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};
struct FormatError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct EmbeddingConfig
{
    std::size_t word_dim = 64;
    std::size_t seq_dim = 96;
    std::size_t graph_dim = 128;
    std::size_t block_dim = 128;
    std::size_t window = 5;
    std::size_t seq_layers = 6;
    std::size_t seq_heads = 8;
    std::vector<std::size_t> gat_heads{8, 8, 1};
    double alpha = 0.6;
    double clip_cap = 5.0;
    std::size_t m_max = 512;
    std::size_t pool_hidden = 64;
    std::uint64_t seed = 42;

    /// Random projections per attention head; features are twice this.
    std::size_t random_features = 96;
    std::size_t seq_ff_dim = 96;
    float leaky_slope = 0.2f;

    std::size_t w2v_epochs = 5;
    std::size_t w2v_negatives = 5;
    double w2v_learning_rate = 0.025;

    /// Throws ConfigError when an invariant does not hold.
    void validate() const;
};

/// Drops immediates: PUSH1..PUSH32 and PUSH0 stay distinct tokens.
std::string_view token_of(const evm::Instruction& ins);

class Vocabulary
{
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> tokens, Mat vectors, Hash256 corpus_hash);

    std::size_t dim() const { return static_cast<std::size_t>(vectors_.cols()); }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const Mat& vectors() const { return vectors_; }
    const Hash256& training_corpus_hash() const { return corpus_hash_; }

    /// -1 when the token is unknown.
    int index_of(std::string_view token) const;
    /// Zero vector for unknown tokens.
    RowVec lookup(std::string_view token) const;
    /// Fraction of corpus tokens with a learned vector.
    double coverage(const std::vector<std::vector<std::string>>& corpus) const;

    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary& other) const;

private:
    std::vector<std::string> tokens_;
    Mat vectors_;
    Hash256 corpus_hash_{};
    std::unordered_map<std::string, int> index_;
};

Hash256 corpus_hash(const std::vector<std::vector<std::string>>& corpus);

/// Skip-gram with negative sampling; deterministic under config.seed.
Vocabulary train_vocabulary(const std::vector<std::vector<std::string>>& corpus, const EmbeddingConfig& config);

struct SequenceLayerParams
{
    Mat wq, wk, wv, wo;
    /// One random projection matrix (random_features x head_dim) per head.
    std::vector<Mat> features;
    Vec ln1_gain, ln1_bias;
    Mat ff1;
    Vec ff1_bias;
    Mat ff2;
    Vec ff2_bias;
    Vec ln2_gain, ln2_bias;
};

struct GatLayerParams
{
    std::size_t heads = 1;
    std::size_t head_dim = 0;
    bool concat = true;
    /// in_dim x (heads * head_dim)
    Mat w;
    /// heads x head_dim, applied to the source and destination node.
    Mat a_src, a_dst;
};

struct PoolParams
{
    /// pool_hidden x graph_dim
    Mat w;
    Vec a;
};

struct EncoderParams
{
    std::uint64_t seed = 0;
    Mat input;
    Vec input_bias;
    std::vector<SequenceLayerParams> layers;
    std::vector<GatLayerParams> gat;
    PoolParams pool;
    /// Maps raw word vectors into the sequence space for unreached blocks.
    Mat word_to_seq;
    /// Maps sequence-space rows to block_dim when the graph stage is off.
    Mat seq_to_block;

    void save(const std::filesystem::path& path) const;
    static EncoderParams load(const std::filesystem::path& path);
    bool operator==(const EncoderParams& other) const;
};

EncoderParams make_params(const EmbeddingConfig& config);

/// Orthogonal Gaussian projections (rows) for positive random features.
Mat orthogonal_features(std::size_t rows, std::size_t dim, Rng& rng);

/// Dense attention matrix implied by the random-feature approximation of
/// softmax(q k^T / sqrt(d)). Rows of `q` and `k` are positions.
Mat favor_attention_matrix(const MatRef& q, const MatRef& k, const Mat& omega);

/// Same approximation applied to values without forming the matrix.
Mat favor_attention(const MatRef& q, const MatRef& k, const MatRef& v, const Mat& omega);

/// Exact softmax(q k^T / sqrt(d)).
Mat softmax_attention_matrix(const MatRef& q, const MatRef& k);

struct PathEmbedding
{
    std::size_t path_index = 0;
    /// m_max x word_dim
    Mat v;
    std::size_t valid_len = 0;
    std::vector<bool> mask;
};

PathEmbedding embed_path(std::span<const std::string> tokens, const Vocabulary& vocab, const EmbeddingConfig& config,
    std::atomic<std::uint64_t>* truncations = nullptr, std::size_t path_index = 0);

/// n x (m_max x seq_dim); masked rows are zero.
std::vector<Mat> encode_sequences(
    const std::vector<PathEmbedding>& batch, const EncoderParams& params, const EmbeddingConfig& config);

/// Encodes the valid rows of several sequences stacked vertically.
/// `lengths` partitions the rows of `x`.
Mat encode_packed(const Mat& x, std::span<const std::size_t> lengths, const EncoderParams& params,
    const EmbeddingConfig& config);

std::vector<double> fusion_weights(std::span<const std::uint32_t> starts, double avg_block_len,
    const EmbeddingConfig& config);

struct Occurrence
{
    Mat slice;
    std::uint32_t start = 0;
};

Mat fuse_block(std::span<const Occurrence> occurrences, double avg_block_len, const EmbeddingConfig& config);

/// Word rows of a block projected into the sequence space.
Mat fallback_block(const Mat& word_rows, const EncoderParams& params);

struct InstructionGraph
{
    Mat nodes;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> seq_edges;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> cfg_edges;
    /// First node of each block, plus a final sentinel.
    std::vector<std::uint32_t> block_offset;

    std::size_t node_count() const { return static_cast<std::size_t>(nodes.rows()); }
};

InstructionGraph build_instruction_graph(const cfg::FunctionCfg& function, std::span<const Mat> fused);

Mat encode_graph(const InstructionGraph& graph, const EncoderParams& params, const EmbeddingConfig& config);

template <class Derived>
Vec pool_block(const Eigen::MatrixBase<Derived>& rows, const PoolParams& pool)
{
    const Mat hidden = (pool.w * rows.transpose()).array().tanh().matrix();
    const Vec scores = linalg::softmax((pool.a.transpose() * hidden).transpose());
    return rows.transpose() * scores;
}

struct StageToggles
{
    bool sequence = true;
    bool graph = true;
};

struct FunctionEmbedding
{
    cfg::FunctionId function_id;
    std::optional<Selector> selector;
    /// One row of block_dim per function-local block.
    Mat blocks;
    std::vector<bool> fallback;
    std::size_t truncated_paths = 0;

    std::size_t fallback_count() const { return static_cast<std::size_t>(std::count(fallback.begin(), fallback.end(), true)); }
    bool operator==(const FunctionEmbedding& other) const;
};

/// Sequence encoder output per vocabulary-id stream, for one model. Functions
/// of a contract often share opcode-identical paths. Every stream is encoded
/// on its own, so embeddings do not depend on what the cache already holds.
using SequenceCache = std::map<std::vector<int>, Mat>;

FunctionEmbedding embed_function(const cfg::FunctionCfg& function, const cfg::PathSet& paths, const Vocabulary& vocab,
    const EncoderParams& params, const EmbeddingConfig& config, StageToggles stages = {},
    std::atomic<std::uint64_t>* truncations = nullptr, SequenceCache* cache = nullptr);

/// Instruction token streams of a contract, one sequence per contract.
std::vector<std::string> contract_tokens(const evm::Program& program);

}  // namespace deltascan::encoder
