// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deltascan/cfg.hpp>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deltascan::detectors
{
enum class DefectClass : std::uint8_t
{
    WeakAuthValidation = 0,
    LoosePermManagement = 1,
    BypassAuthReentrancy = 2,
};

std::string_view to_string(DefectClass c) noexcept;
std::optional<DefectClass> parse_defect_class(std::string_view name) noexcept;

enum class RecordSource : std::uint8_t
{
    builtin_detector,
    external_report,
};

struct DefectRecord
{
    std::string contract_name;
    /// Canonical ABI signature. Builtin detections only know the selector and
    /// leave this empty.
    std::string function_signature;
    std::optional<Selector> selector;
    DefectClass defect_class = DefectClass::BypassAuthReentrancy;
    std::optional<std::string> subtype;
    RecordSource source = RecordSource::external_report;
    std::optional<std::string> evidence;
};

struct MalformedSignature : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

/// Throws MalformedSignature unless `signature` is a canonical ABI signature:
/// identifier, one parameter list, canonical type names, no whitespace.
void validate_signature(std::string_view signature);

/// First four bytes of keccak-256 over a validated canonical signature.
Selector signature_selector(std::string_view signature);

struct MappedDefect
{
    DefectRecord record;
    cfg::FunctionId function_id;
    Selector selector;
};

enum class UnmappedReason : std::uint8_t
{
    unknown_contract,
    selector_absent,
    malformed_signature,
};

std::string_view to_string(UnmappedReason r) noexcept;

struct UnmappedRecord
{
    DefectRecord record;
    UnmappedReason reason = UnmappedReason::unknown_contract;
    std::string detail;
};

struct ContractSelectors
{
    Hash256 code_hash{};
    cfg::SelectorMap selectors;
    /// Byte offset of each selector's entry block.
    std::map<Selector, std::uint32_t> entry_offsets;
};

ContractSelectors contract_selectors(const cfg::ContractGraph& graph, const cfg::FunctionRecovery& recovery);

struct MappingResult
{
    std::vector<MappedDefect> mapped;
    std::vector<UnmappedRecord> unmapped;
};

/// Every input record lands in exactly one of the two outputs.
MappingResult map_report(
    const std::vector<DefectRecord>& report, const std::map<std::string, ContractSelectors>& contracts);

/// Storage-read-before-external-call, written-after heuristic over the
/// loop-avoiding paths of one function. At most one record per function.
std::vector<DefectRecord> detect_bypass_reentrancy(
    const cfg::FunctionCfg& function, const cfg::PathSet& paths, std::string_view contract_name = {});

std::vector<DefectRecord> detect_bypass_reentrancy(const cfg::FunctionCfg& function,
    std::size_t max_paths = cfg::default_max_paths, std::string_view contract_name = {});

struct ReportSyntaxError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct SchemaError
{
    std::size_t index = 0;
    std::string message;
};

struct ParsedReport
{
    std::vector<DefectRecord> records;
    std::vector<SchemaError> errors;
};

/// Strict JSON report parse; bad records are collected, a bad document throws.
ParsedReport parse_report_file(std::string_view bytes);

}  // namespace deltascan::detectors
