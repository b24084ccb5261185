// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#include <deltascan/index.hpp>
#include <deltascan/keccak.hpp>
#include <deltascan/rng.hpp>

#include "binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <queue>
#include <set>

namespace deltascan::index
{
namespace
{
constexpr char magic[4] = {'D', 'S', 'I', 'X'};
constexpr std::uint16_t format_version = 1;
constexpr std::uint8_t metric_euclidean = 1;
constexpr std::size_t header_size = 4 + 2 + 2 + 1 + 2 + 2 + 8 + 8;
constexpr int level_cap = 24;
constexpr std::uint8_t unlabeled = 0xff;

using Candidate = std::pair<float, std::uint32_t>;

std::uint64_t checksum(std::string_view body)
{
    const auto h = keccak256(body);
    std::uint64_t v = 0;
    std::memcpy(&v, h.data(), sizeof v);
    return v;
}

/// Generation-stamped visited set reused across searches on one thread.
class Visited
{
public:
    void reset(std::size_t n)
    {
        if (stamp_.size() < n)
            stamp_.resize(n, 0);
        if (++gen_ == 0)
        {
            std::fill(stamp_.begin(), stamp_.end(), 0);
            gen_ = 1;
        }
    }
    bool mark(std::uint32_t id)
    {
        if (stamp_[id] == gen_)
            return false;
        stamp_[id] = gen_;
        return true;
    }

private:
    std::vector<std::uint32_t> stamp_;
    std::uint32_t gen_ = 0;
};

thread_local Visited visited;

}  // namespace

FunctionKey function_key(const EntryLabel& label) noexcept
{
    return {label.code_hash, label.selector, label.defect_class};
}

double euclidean(std::span<const float> a, std::span<const float> b) noexcept
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

AnnIndex::AnnIndex(IndexParams params) : params_{params}
{
    if (params_.dim == 0 || params_.dim > 0xffff)
        throw std::invalid_argument{"index dimension out of range"};
    if (params_.m < 2 || params_.m > 0xffff || params_.ef_construction == 0 || params_.ef_construction > 0xffff)
        throw std::invalid_argument{"index graph parameters out of range"};
    level_mult_ = 1.0 / std::log(static_cast<double>(params_.m));
}

int AnnIndex::draw_level(std::uint64_t id) const noexcept
{
    double u = static_cast<double>(splitmix64(params_.seed ^ id) >> 11) * 0x1.0p-53;
    if (u <= 0.0)
        u = 0x1.0p-53;
    return std::min(level_cap, static_cast<int>(std::floor(-std::log(u) * level_mult_)));
}

std::span<const float> AnnIndex::vector(std::uint64_t entry_id) const
{
    if (entry_id >= size())
        throw std::out_of_range{"entry id out of range"};
    return {data_.data() + entry_id * params_.dim, params_.dim};
}

float AnnIndex::dist2(const float* a, std::uint32_t b) const noexcept
{
    const auto n = static_cast<Eigen::Index>(params_.dim);
    const Eigen::Map<const linalg::RowVec> x{a, n};
    const Eigen::Map<const linalg::RowVec> y{data_.data() + std::size_t{b} * params_.dim, n};
    return (x - y).squaredNorm();
}

std::uint32_t AnnIndex::greedy(const float* q, std::uint32_t cur, int from, int to) const
{
    float best = dist2(q, cur);
    for (int layer = from; layer >= to; --layer)
    {
        bool moved = true;
        while (moved)
        {
            moved = false;
            for (const auto n : links_[cur][static_cast<std::size_t>(layer)])
            {
                const float d = dist2(q, n);
                if (d < best || (d == best && n < cur))
                {
                    best = d;
                    cur = n;
                    moved = true;
                }
            }
        }
    }
    return cur;
}

std::vector<Candidate> AnnIndex::search_layer(const float* q, std::uint32_t entry, std::size_t ef, int layer) const
{
    visited.reset(size());
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;
    std::priority_queue<Candidate> best;
    const Candidate start{dist2(q, entry), entry};
    visited.mark(entry);
    frontier.push(start);
    best.push(start);
    while (!frontier.empty())
    {
        const auto c = frontier.top();
        if (c > best.top() && best.size() >= ef)
            break;
        frontier.pop();
        for (const auto n : links_[c.second][static_cast<std::size_t>(layer)])
        {
            if (!visited.mark(n))
                continue;
            const Candidate cand{dist2(q, n), n};
            if (best.size() < ef || cand < best.top())
            {
                frontier.push(cand);
                best.push(cand);
                if (best.size() > ef)
                    best.pop();
            }
        }
    }
    std::vector<Candidate> out(best.size());
    for (auto i = out.size(); i-- > 0;)
    {
        out[i] = best.top();
        best.pop();
    }
    return out;
}

AnnIndex::Links AnnIndex::select_neighbors(std::vector<Candidate> candidates, std::size_t m) const
{
    std::sort(candidates.begin(), candidates.end());
    Links kept;
    for (const auto& c : candidates)
    {
        if (kept.size() >= m)
            break;
        const float* v = data_.data() + std::size_t{c.second} * params_.dim;
        const bool diverse =
            std::none_of(kept.begin(), kept.end(), [&](std::uint32_t k) { return dist2(v, k) < c.first; });
        if (diverse)
            kept.push_back(c.second);
    }
    return kept;
}

std::uint64_t AnnIndex::insert(std::span<const float> vec, EntryLabel label)
{
    if (vec.size() != params_.dim)
        throw DimensionMismatch{"vector has " + std::to_string(vec.size()) + " components, index expects " +
                                std::to_string(params_.dim)};
    if (size() >= 0xffffffffu)
        throw std::length_error{"index full"};
    const auto id = static_cast<std::uint32_t>(size());
    const int level = draw_level(id);
    data_.insert(data_.end(), vec.begin(), vec.end());
    functions_[function_key(label)].push_back(id);
    labels_.push_back(std::move(label));
    levels_.push_back(level);
    links_.emplace_back(static_cast<std::size_t>(level) + 1);

    if (top_level_ < 0)
    {
        entry_point_ = id;
        top_level_ = level;
        return id;
    }
    const float* q = data_.data() + std::size_t{id} * params_.dim;
    std::uint32_t cur = entry_point_;
    if (level < top_level_)
        cur = greedy(q, cur, top_level_, level + 1);
    for (int layer = std::min(level, top_level_); layer >= 0; --layer)
    {
        const auto l = static_cast<std::size_t>(layer);
        const auto found = search_layer(q, cur, params_.ef_construction, layer);
        links_[id][l] = select_neighbors(found, params_.m);
        for (const auto n : links_[id][l])
        {
            auto& back = links_[n][l];
            back.push_back(id);
            if (back.size() > max_links(layer))
            {
                const float* nv = data_.data() + std::size_t{n} * params_.dim;
                std::vector<Candidate> pool;
                pool.reserve(back.size());
                for (const auto b : back)
                    pool.emplace_back(dist2(nv, b), b);
                back = select_neighbors(std::move(pool), max_links(layer));
            }
        }
        cur = found.front().second;
    }
    if (level > top_level_)
    {
        top_level_ = level;
        entry_point_ = id;
    }
    return id;
}

std::vector<Neighbor> AnnIndex::query(std::span<const float> vec, std::size_t k, std::size_t ef_search) const
{
    if (vec.size() != params_.dim)
        throw DimensionMismatch{"query dimension does not match index"};
    if (empty() || k == 0)
        return {};
    const std::uint32_t start = top_level_ > 0 ? greedy(vec.data(), entry_point_, top_level_, 1) : entry_point_;
    const auto found = search_layer(vec.data(), start, std::max(ef_search, k), 0);
    std::vector<Neighbor> out;
    out.reserve(found.size());
    for (const auto& c : found)
        out.push_back({c.second, euclidean(vec, vector(c.second))});
    std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
        return std::tie(a.distance, a.entry_id) < std::tie(b.distance, b.entry_id);
    });
    if (out.size() > k)
        out.resize(k);
    return out;
}

std::vector<Neighbor> AnnIndex::linear_scan(std::span<const float> vec, std::size_t k) const
{
    if (vec.size() != params_.dim)
        throw DimensionMismatch{"query dimension does not match index"};
    std::vector<Neighbor> all(size());
    for (std::size_t i = 0; i < size(); ++i)
        all[i] = {i, euclidean(vec, vector(i))};
    const auto take = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
        [](const Neighbor& a, const Neighbor& b) {
            return std::tie(a.distance, a.entry_id) < std::tie(b.distance, b.entry_id);
        });
    all.resize(take);
    return all;
}

std::string AnnIndex::serialize() const
{
    io::Writer body;
    body.put(params_.seed);
    body.put(entry_point_);
    body.put(static_cast<std::int32_t>(top_level_));
    for (std::size_t i = 0; i < size(); ++i)
    {
        const auto& l = labels_[i];
        body.put(static_cast<std::uint64_t>(i));
        body.str16(l.contract_name);
        body.str16(l.function);
        body.str16(to_hex(l.code_hash));
        body.str16(l.selector.hex());
        body.put(l.block_id);
        body.put(l.defect_class ? static_cast<std::uint8_t>(*l.defect_class) : unlabeled);
        body.floats(data_.data() + i * params_.dim, params_.dim);
    }
    for (std::size_t i = 0; i < size(); ++i)
    {
        body.put(static_cast<std::uint8_t>(links_[i].size()));
        for (const auto& layer : links_[i])
        {
            body.put(static_cast<std::uint32_t>(layer.size()));
            body.raw(layer.data(), layer.size() * sizeof(std::uint32_t));
        }
    }

    io::Writer out;
    out.raw(magic, sizeof magic);
    out.put(format_version);
    out.put(static_cast<std::uint16_t>(params_.dim));
    out.put(metric_euclidean);
    out.put(static_cast<std::uint16_t>(params_.m));
    out.put(static_cast<std::uint16_t>(params_.ef_construction));
    out.put(static_cast<std::uint64_t>(size()));
    out.put(checksum(body.data()));
    out.data() += body.data();
    return std::move(out.data());
}

AnnIndex AnnIndex::deserialize(std::string_view bytes)
{
    if (bytes.size() < header_size)
        throw CorruptFile{"index file shorter than its header"};
    if (std::memcmp(bytes.data(), magic, sizeof magic) != 0)
        throw CorruptFile{"bad index magic"};
    io::Reader head{bytes.substr(sizeof magic, header_size - sizeof magic)};
    const auto version = head.get<std::uint16_t>();
    if (version != format_version)
        throw CorruptFile{"unsupported index version " + std::to_string(version)};
    IndexParams params;
    params.dim = head.get<std::uint16_t>();
    if (head.get<std::uint8_t>() != metric_euclidean)
        throw CorruptFile{"unsupported index metric"};
    params.m = head.get<std::uint16_t>();
    params.ef_construction = head.get<std::uint16_t>();
    const auto count = head.get<std::uint64_t>();
    const auto sum = head.get<std::uint64_t>();
    const auto body_bytes = bytes.substr(header_size);
    if (checksum(body_bytes) != sum)
        throw CorruptFile{"index checksum mismatch"};

    try
    {
        io::Reader in{body_bytes};
        params.seed = in.get<std::uint64_t>();
        AnnIndex index{params};
        const auto entry = in.get<std::uint32_t>();
        const auto top = in.get<std::int32_t>();
        if (count > in.remaining() / (params.dim * sizeof(float)))
            throw CorruptFile{"entry count exceeds file size"};
        index.data_.resize(count * params.dim);
        index.labels_.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i)
        {
            if (in.get<std::uint64_t>() != i)
                throw CorruptFile{"entry ids are not dense"};
            EntryLabel l;
            l.contract_name = in.str16();
            l.function = in.str16();
            const auto hash = from_hex(in.str16());
            if (hash.size() != l.code_hash.size())
                throw CorruptFile{"bad code hash in label"};
            std::copy(hash.begin(), hash.end(), l.code_hash.begin());
            l.selector = Selector::parse(in.str16());
            l.block_id = in.get<std::uint32_t>();
            const auto defect = in.get<std::uint8_t>();
            if (defect != unlabeled)
            {
                if (defect > static_cast<std::uint8_t>(DefectClass::BypassAuthReentrancy))
                    throw CorruptFile{"bad defect class in label"};
                l.defect_class = static_cast<DefectClass>(defect);
            }
            in.floats(index.data_.data() + i * params.dim, params.dim);
            index.functions_[function_key(l)].push_back(static_cast<std::uint32_t>(i));
            index.labels_.push_back(std::move(l));
        }
        index.links_.resize(count);
        index.levels_.resize(count);
        int highest = -1;
        for (std::uint64_t i = 0; i < count; ++i)
        {
            const auto layers = in.get<std::uint8_t>();
            if (layers == 0 || layers > level_cap + 1)
                throw CorruptFile{"bad layer count"};
            index.links_[i].resize(layers);
            index.levels_[i] = layers - 1;
            highest = std::max(highest, layers - 1);
            for (auto& layer : index.links_[i])
            {
                const auto n = in.get<std::uint32_t>();
                if (n > in.remaining() / sizeof(std::uint32_t))
                    throw CorruptFile{"neighbor list exceeds file size"};
                layer.resize(n);
                std::memcpy(layer.data(), in.take(n * sizeof(std::uint32_t)), n * sizeof(std::uint32_t));
            }
        }
        for (std::uint64_t i = 0; i < count; ++i)
            for (std::size_t l = 0; l < index.links_[i].size(); ++l)
                for (const auto n : index.links_[i][l])
                    if (n >= count || index.links_[n].size() <= l)
                        throw CorruptFile{"neighbor reference out of range"};
        if (in.remaining() != 0)
            throw CorruptFile{"trailing bytes after index"};
        if (top != highest || (count > 0 && (entry >= count || index.levels_[entry] != top)))
            throw CorruptFile{"bad entry point"};
        index.entry_point_ = entry;
        index.top_level_ = top;
        return index;
    }
    catch (const io::ShortRead&)
    {
        throw CorruptFile{"index file truncated"};
    }
    catch (const HexError&)
    {
        throw CorruptFile{"bad hex field in label"};
    }
    catch (const std::invalid_argument& e)
    {
        throw CorruptFile{std::string{"bad index parameters: "} + e.what()};
    }
}

void AnnIndex::save(const std::filesystem::path& path) const
{
    io::write_file(path, serialize());
}

AnnIndex AnnIndex::load(const std::filesystem::path& path)
{
    return deserialize(io::read_file(path));
}

std::vector<Finding> decide_similar(
    const encoder::FunctionEmbedding& query, const AnnIndex& index, double threshold, const DecisionOptions& options)
{
    if (!(threshold > 0.0))
        throw std::invalid_argument{"threshold must be positive"};
    if (!query.selector || index.empty() || query.blocks.rows() == 0)
        return {};
    if (static_cast<std::size_t>(query.blocks.cols()) != index.dim())
        throw DimensionMismatch{"query blocks do not match index dimension"};

    const auto rows = static_cast<std::size_t>(query.blocks.rows());
    const auto dim = index.dim();
    auto row = [&](std::size_t r) { return std::span<const float>{query.blocks.data() + r * dim, dim}; };

    std::set<FunctionKey> candidates;
    const auto ef = std::max(options.ef_search, options.candidates_per_block);
    for (std::size_t r = 0; r < rows; ++r)
        for (const auto& n : index.query(row(r), options.candidates_per_block, ef))
        {
            const auto& l = index.label(n.entry_id);
            if (l.selector == *query.selector)
                candidates.insert(function_key(l));
        }

    std::vector<Finding> out;
    for (const auto& key : candidates)
    {
        const auto& entries = index.functions().at(key);
        std::vector<double> distances(rows);
        bool covered = true;
        for (std::size_t r = 0; r < rows && covered; ++r)
        {
            double best = std::numeric_limits<double>::infinity();
            for (const auto e : entries)
                best = std::min(best, euclidean(row(r), index.vector(e)));
            distances[r] = best;
            covered = best <= threshold;
        }
        if (!covered)
            continue;
        Finding f;
        f.function_id = query.function_id;
        f.selector = query.selector;
        f.matched = index.label(entries.front());
        f.max_block_distance = *std::max_element(distances.begin(), distances.end());
        f.block_distances = std::move(distances);
        f.threshold = threshold;
        f.defect_class = key.defect_class;
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace deltascan::index
