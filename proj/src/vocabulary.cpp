// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "binary_io.hpp"

#include <deltascan/encoder.hpp>
#include <deltascan/keccak.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace deltascan::encoder
{
namespace
{
constexpr char vocab_magic[4] = {'D', 'S', 'V', 'W'};
constexpr std::uint16_t vocab_version = 1;
}  // namespace

std::string_view token_of(const evm::Instruction& ins)
{
    return ins.mnemonic();
}

std::vector<std::string> contract_tokens(const evm::Program& program)
{
    std::vector<std::string> out;
    out.reserve(program.instructions.size());
    for (const auto& ins : program.instructions)
        out.emplace_back(token_of(ins));
    return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, Mat vectors, Hash256 corpus_hash)
    : tokens_{std::move(tokens)}, vectors_{std::move(vectors)}, corpus_hash_{corpus_hash}
{
    if (static_cast<std::size_t>(vectors_.rows()) != tokens_.size())
        throw DimensionMismatch{"one vector per token required"};
    for (std::size_t i = 0; i < tokens_.size(); ++i)
        index_.emplace(tokens_[i], static_cast<int>(i));
}

int Vocabulary::index_of(std::string_view token) const
{
    const auto it = index_.find(std::string{token});
    return it == index_.end() ? -1 : it->second;
}

RowVec Vocabulary::lookup(std::string_view token) const
{
    const int i = index_of(token);
    if (i < 0)
        return RowVec::Zero(vectors_.cols());
    return vectors_.row(i);
}

double Vocabulary::coverage(const std::vector<std::vector<std::string>>& corpus) const
{
    std::size_t total = 0, known = 0;
    for (const auto& seq : corpus)
        for (const auto& t : seq)
        {
            ++total;
            known += index_of(t) >= 0;
        }
    return total == 0 ? 1.0 : static_cast<double>(known) / static_cast<double>(total);
}

bool Vocabulary::operator==(const Vocabulary& other) const
{
    return tokens_ == other.tokens_ && vectors_.rows() == other.vectors_.rows() &&
           vectors_.cols() == other.vectors_.cols() && vectors_ == other.vectors_ &&
           corpus_hash_ == other.corpus_hash_;
}

void Vocabulary::save(const std::filesystem::path& path) const
{
    io::Writer w;
    w.raw(vocab_magic, 4);
    w.put(vocab_version);
    w.put(static_cast<std::uint16_t>(dim()));
    w.put(static_cast<std::uint32_t>(size()));
    for (std::size_t i = 0; i < size(); ++i)
    {
        w.str16(tokens_[i]);
        w.floats(vectors_.row(static_cast<Eigen::Index>(i)).data(), dim());
    }
    w.raw(corpus_hash_.data(), corpus_hash_.size());
    io::write_file(path, w.data());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path)
{
    const auto data = io::read_file(path);
    try
    {
        io::Reader r{data};
        if (std::string_view{r.take(4), 4} != std::string_view{vocab_magic, 4})
            throw FormatError{"not a vocabulary file"};
        if (r.get<std::uint16_t>() != vocab_version)
            throw FormatError{"unsupported vocabulary version"};
        const std::size_t d = r.get<std::uint16_t>();
        const std::size_t n = r.get<std::uint32_t>();
        std::vector<std::string> tokens;
        Mat vectors(static_cast<Eigen::Index>(std::min<std::size_t>(n, 1u << 16)), static_cast<Eigen::Index>(d));
        if (static_cast<std::size_t>(vectors.rows()) != n)
            throw FormatError{"implausible token count"};
        for (std::size_t i = 0; i < n; ++i)
        {
            tokens.push_back(r.str16());
            r.floats(vectors.row(static_cast<Eigen::Index>(i)).data(), d);
        }
        Hash256 h;
        std::memcpy(h.data(), r.take(h.size()), h.size());
        if (r.remaining() != 0)
            throw FormatError{"trailing bytes in vocabulary file"};
        return Vocabulary{std::move(tokens), std::move(vectors), h};
    }
    catch (const io::ShortRead& e)
    {
        throw FormatError{std::string{"truncated vocabulary file: "} + e.what()};
    }
}

Hash256 corpus_hash(const std::vector<std::vector<std::string>>& corpus)
{
    std::string joined;
    for (const auto& seq : corpus)
    {
        for (std::size_t i = 0; i < seq.size(); ++i)
        {
            if (i)
                joined += ' ';
            joined += seq[i];
        }
        joined += '\n';
    }
    return keccak256(std::string_view{joined});
}

Vocabulary train_vocabulary(const std::vector<std::vector<std::string>>& corpus, const EmbeddingConfig& config)
{
    config.validate();
    std::map<std::string, std::size_t> counts;
    for (const auto& seq : corpus)
        for (const auto& t : seq)
            ++counts[t];
    if (counts.empty())
        throw EmptyCorpus{"training corpus has no tokens"};

    std::vector<std::string> tokens;
    std::vector<double> freq;
    std::map<std::string, int> ids;
    for (const auto& [t, c] : counts)
    {
        ids.emplace(t, static_cast<int>(tokens.size()));
        tokens.push_back(t);
        freq.push_back(std::pow(static_cast<double>(c), 0.75));
    }
    std::vector<double> cumulative(freq.size());
    double acc = 0;
    for (std::size_t i = 0; i < freq.size(); ++i)
        cumulative[i] = acc += freq[i];

    const auto n = static_cast<Eigen::Index>(tokens.size());
    const auto d = static_cast<Eigen::Index>(config.word_dim);
    Rng rng{config.seed};
    Mat in(n, d);
    for (Eigen::Index i = 0; i < in.size(); ++i)
        in.data()[i] = static_cast<float>(rng.uniform(-0.5, 0.5) / static_cast<double>(d));
    Mat out = Mat::Zero(n, d);

    std::vector<std::vector<int>> encoded;
    std::size_t total = 0;
    for (const auto& seq : corpus)
    {
        auto& e = encoded.emplace_back();
        for (const auto& t : seq)
            e.push_back(ids.at(t));
        total += seq.size();
    }

    const auto window = static_cast<std::ptrdiff_t>(config.window);
    const std::size_t steps = std::max<std::size_t>(1, total * config.w2v_epochs);
    std::size_t step = 0;
    RowVec grad(d);
    auto train_pair = [&](int center, int target, float label, float lr) {
        const float dot = in.row(center).dot(out.row(target));
        const float g = (label - 1.0f / (1.0f + std::exp(-dot))) * lr;
        grad.noalias() += g * out.row(target);
        out.row(target) += g * in.row(center);
    };
    for (std::size_t epoch = 0; epoch < config.w2v_epochs; ++epoch)
    {
        for (const auto& seq : encoded)
        {
            const auto len = static_cast<std::ptrdiff_t>(seq.size());
            for (std::ptrdiff_t i = 0; i < len; ++i, ++step)
            {
                const double progress = static_cast<double>(step) / static_cast<double>(steps);
                const auto lr = static_cast<float>(config.w2v_learning_rate * std::max(1e-4, 1.0 - progress));
                for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - window);
                     j <= std::min(len - 1, i + window); ++j)
                {
                    if (j == i)
                        continue;
                    const int center = seq[static_cast<std::size_t>(j)];
                    grad.setZero();
                    train_pair(center, seq[static_cast<std::size_t>(i)], 1.0f, lr);
                    for (std::size_t k = 0; k < config.w2v_negatives; ++k)
                    {
                        const double u = rng.uniform() * acc;
                        const auto neg = static_cast<int>(
                            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
                        const int target = std::min(neg, static_cast<int>(n - 1));
                        if (target == seq[static_cast<std::size_t>(i)])
                            continue;
                        train_pair(center, target, 0.0f, lr);
                    }
                    in.row(center) += grad;
                }
            }
        }
    }
    return Vocabulary{std::move(tokens), std::move(in), corpus_hash(corpus)};
}

}  // namespace deltascan::encoder
