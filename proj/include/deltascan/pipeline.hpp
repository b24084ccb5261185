// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deltascan/detectors.hpp>
#include <deltascan/encoder.hpp>
#include <deltascan/index.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deltascan::pipeline
{
struct ConfigError : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

struct PipelineConfig
{
    encoder::EmbeddingConfig embedding;
    std::size_t max_paths = cfg::default_max_paths;
    double threshold = index::default_threshold;
    std::filesystem::path index_path = "deltascan.dsix";
    std::filesystem::path cache_dir = ".deltascan-cache";
    std::string api_url;
    std::optional<std::string> api_key;
    double requests_per_second = 5.0;
    encoder::StageToggles stages;
    /// Permits turning both encoder stages off.
    bool force_stages = false;
    std::size_t workers = 1;
    /// Store every function at embed time, not only defective ones.
    bool store_all = false;
    /// External command turning a source file into runtime bytecode hex.
    std::string compile_cmd;

    void validate() const;
};

/// `key = value` lines; `#` starts a comment. Unknown keys are errors.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

/// Fills api_key from DELTASCAN_API_KEY when that variable is set.
void apply_environment(PipelineConfig& config);

inline constexpr const char* api_key_env = "DELTASCAN_API_KEY";

std::filesystem::path vocab_path(const std::filesystem::path& index_path);
std::filesystem::path params_path(const std::filesystem::path& index_path);

struct ContractInput
{
    std::string name;
    std::filesystem::path path;
};

struct InputSet
{
    std::vector<ContractInput> contracts;
    std::vector<std::filesystem::path> reports;
};

/// Files are taken as given; directories contribute their .hex, .bin and
/// .json files in name order. JSON files are defect reports.
InputSet collect_inputs(const std::vector<std::filesystem::path>& paths);

/// `.hex` files hold hex text (optional 0x prefix), `.bin` files raw bytes.
/// Other files run through `compile_cmd` when one is configured.
Bytes read_bytecode(const std::filesystem::path& path, const PipelineConfig& config);

struct StageTimings
{
    double disassemble_ms = 0;
    double cfg_ms = 0;
    double detect_ms = 0;
    double embed_ms = 0;
    double query_ms = 0;
    double total_ms = 0;
};

struct Counters
{
    std::size_t functions = 0;
    std::size_t functions_embedded = 0;
    std::size_t blocks_embedded = 0;
    std::size_t paths_truncated = 0;
    std::size_t blocks_fallback = 0;
    std::size_t unmapped_records = 0;
};

struct ScanResult
{
    std::string contract;
    std::string source;
    Hash256 code_hash{};
    std::vector<index::Finding> findings;
    std::vector<detectors::DefectRecord> detector_records;
    StageTimings timings;
    Counters counters;
    std::optional<std::string> error;
};

/// One JSON object, no trailing newline.
std::string to_json_line(const ScanResult& result);

/// Everything the encoder needs, shared read-only across workers.
struct Model
{
    encoder::Vocabulary vocab;
    encoder::EncoderParams params;
};

struct Analysis
{
    evm::Program program;
    cfg::ContractGraph graph;
    cfg::FunctionRecovery recovery;
};

Analysis analyze(BytesView code, StageTimings* timings = nullptr);

/// Embeds the selected functions of an analyzed contract, in recovery order.
std::vector<encoder::FunctionEmbedding> embed_functions(const Analysis& analysis, const Model& model,
    const PipelineConfig& config, const std::function<bool(const cfg::FunctionCfg&)>& select,
    encoder::StageToggles stages, Counters* counters = nullptr);

struct EmbedSummary
{
    std::vector<ScanResult> contracts;
    std::size_t functions_stored = 0;
    std::size_t entries_stored = 0;
    std::size_t duplicates_skipped = 0;
    std::vector<detectors::UnmappedRecord> unmapped;
    std::vector<detectors::SchemaError> report_errors;
    double mean_contract_ms = 0;
};

std::string to_json(const EmbedSummary& summary);

/// Analyzes, labels and stores defective functions; writes the index, its
/// vocabulary and the encoder parameters.
EmbedSummary cmd_embed(const PipelineConfig& config, const InputSet& inputs);

using ResultSink = std::function<void(const ScanResult&)>;

/// Loads the index stored at config.index_path and scans every contract.
/// Results reach `sink` in input order.
std::vector<ScanResult> cmd_detect(const PipelineConfig& config, const std::vector<ContractInput>& inputs,
    const ResultSink& sink = {});

/// Scans with an already loaded model and index.
std::vector<ScanResult> detect_with(const PipelineConfig& config, const Model& model, const index::AnnIndex& index,
    const std::vector<ContractInput>& inputs, encoder::StageToggles stages, double threshold,
    const ResultSink& sink = {});

struct AblationRow
{
    std::string variant;
    double threshold = 0;
    std::size_t findings = 0;
    std::size_t functions_matched = 0;
};

inline const std::vector<double> default_ablation_thresholds{0.01, 0.1, 1.0, 2.0};

std::vector<AblationRow> cmd_ablate(const PipelineConfig& config, const std::vector<ContractInput>& inputs,
    const std::vector<double>& thresholds = default_ablation_thresholds);

std::string format_ablation(const std::vector<AblationRow>& rows);

struct BadAddress : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};
struct NetworkError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct HttpResponse
{
    int status = 0;
    std::string body;
};

/// Performs one GET; throws NetworkError when no response arrives.
using Transport = std::function<HttpResponse(const std::string& url)>;

/// HTTPS/HTTP transport over cpp-httplib.
Transport http_transport(std::chrono::seconds timeout = std::chrono::seconds{30});

enum class FetchStatus : std::uint8_t
{
    fetched,
    cached,
    not_a_contract,
    failed,
};

std::string_view to_string(FetchStatus s) noexcept;

struct FetchResult
{
    std::string address;
    std::filesystem::path path;
    FetchStatus status = FetchStatus::failed;
    std::string message;
};

struct FetchOptions
{
    std::size_t max_retries = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::function<void(std::chrono::milliseconds)> sleep;
};

/// Lowercase "0x" + 40 hex digits; throws BadAddress.
std::string normalize_address(std::string_view address);

/// Downloads runtime code into `<cache>/<address>.bin`; cached addresses are
/// never requested. Throws BadAddress before any request is made.
std::vector<FetchResult> cmd_fetch(const std::vector<std::string>& addresses, const PipelineConfig& config,
    const Transport& transport, const FetchOptions& options = {});

/// Human-readable disassembly, one instruction per line.
std::string disassembly_text(const evm::Program& program);

}  // namespace deltascan::pipeline
