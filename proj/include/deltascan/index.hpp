// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deltascan/detectors.hpp>
#include <deltascan/encoder.hpp>
#include <deltascan/linalg.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace deltascan::index
{
using detectors::DefectClass;

struct DimensionMismatch : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};
struct CorruptFile : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct EntryLabel
{
    std::string contract_name;
    /// Canonical signature when known, otherwise the selector in hex.
    std::string function;
    Hash256 code_hash{};
    Selector selector;
    std::uint32_t block_id = 0;
    /// Empty for functions stored without a defect label.
    std::optional<DefectClass> defect_class;

    bool operator==(const EntryLabel&) const = default;
};

/// Identity of a labeled function inside the index.
struct FunctionKey
{
    Hash256 code_hash{};
    Selector selector;
    std::optional<DefectClass> defect_class;

    auto operator<=>(const FunctionKey&) const = default;
};

FunctionKey function_key(const EntryLabel& label) noexcept;

struct Neighbor
{
    std::uint64_t entry_id = 0;
    double distance = 0.0;

    bool operator==(const Neighbor&) const = default;
};

struct IndexParams
{
    std::size_t dim = 128;
    std::size_t m = 16;
    std::size_t ef_construction = 200;
    std::uint64_t seed = 42;
};

inline constexpr std::size_t default_ef_search = 64;

/// Hierarchical navigable small-world graph under Euclidean distance.
/// Queries are const and safe to run concurrently; insert is not.
class AnnIndex
{
public:
    explicit AnnIndex(IndexParams params = {});

    std::size_t dim() const noexcept { return params_.dim; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    const IndexParams& params() const noexcept { return params_; }

    std::uint64_t insert(std::span<const float> vector, EntryLabel label);

    /// At most min(k, size()) results, nearest first. Distances are not squared.
    std::vector<Neighbor> query(std::span<const float> vector, std::size_t k,
        std::size_t ef_search = default_ef_search) const;

    /// Exact scan over every entry, for reference and small indexes.
    std::vector<Neighbor> linear_scan(std::span<const float> vector, std::size_t k) const;

    const EntryLabel& label(std::uint64_t entry_id) const { return labels_.at(entry_id); }
    std::span<const float> vector(std::uint64_t entry_id) const;
    int level(std::uint64_t entry_id) const { return levels_.at(entry_id); }

    /// Entry ids of each labeled function, in insertion order.
    const std::map<FunctionKey, std::vector<std::uint32_t>>& functions() const noexcept { return functions_; }

    void save(const std::filesystem::path& path) const;
    static AnnIndex load(const std::filesystem::path& path);

    std::string serialize() const;
    static AnnIndex deserialize(std::string_view bytes);

private:
    using Links = std::vector<std::uint32_t>;

    float dist2(const float* a, std::uint32_t b) const noexcept;
    std::vector<std::pair<float, std::uint32_t>> search_layer(
        const float* q, std::uint32_t entry, std::size_t ef, int layer) const;
    std::uint32_t greedy(const float* q, std::uint32_t entry, int from, int to) const;
    Links select_neighbors(std::vector<std::pair<float, std::uint32_t>> candidates, std::size_t m) const;
    std::size_t max_links(int layer) const noexcept { return layer == 0 ? 2 * params_.m : params_.m; }
    int draw_level(std::uint64_t id) const noexcept;

    IndexParams params_;
    double level_mult_ = 0.0;
    std::vector<float> data_;
    std::vector<EntryLabel> labels_;
    std::vector<int> levels_;
    /// links_[node][layer]
    std::vector<std::vector<Links>> links_;
    std::uint32_t entry_point_ = 0;
    int top_level_ = -1;
    std::map<FunctionKey, std::vector<std::uint32_t>> functions_;
};

double euclidean(std::span<const float> a, std::span<const float> b) noexcept;

struct Finding
{
    cfg::FunctionId function_id;
    std::optional<Selector> selector;
    /// Label of the matched function; block_id is that of its first entry.
    EntryLabel matched;
    std::vector<double> block_distances;
    double max_block_distance = 0.0;
    double threshold = 0.0;
    std::optional<DefectClass> defect_class;
};

struct DecisionOptions
{
    std::size_t candidates_per_block = 32;
    std::size_t ef_search = default_ef_search;
};

inline constexpr double default_threshold = 0.1;

/// A finding per labeled function sharing the query's selector whose blocks
/// cover every query block within `threshold`.
std::vector<Finding> decide_similar(const encoder::FunctionEmbedding& query, const AnnIndex& index,
    double threshold = default_threshold, const DecisionOptions& options = {});

}  // namespace deltascan::index
