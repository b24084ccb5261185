// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <deltascan/detectors.hpp>
#include <deltascan/keccak.hpp>

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace deltascan::detectors
{
std::string_view to_string(DefectClass c) noexcept
{
    switch (c)
    {
    case DefectClass::WeakAuthValidation: return "WeakAuthValidation";
    case DefectClass::LoosePermManagement: return "LoosePermManagement";
    case DefectClass::BypassAuthReentrancy: return "BypassAuthReentrancy";
    }
    return "?";
}

std::optional<DefectClass> parse_defect_class(std::string_view name) noexcept
{
    for (const auto c : {DefectClass::WeakAuthValidation, DefectClass::LoosePermManagement,
             DefectClass::BypassAuthReentrancy})
        if (to_string(c) == name)
            return c;
    return std::nullopt;
}

std::string_view to_string(UnmappedReason r) noexcept
{
    switch (r)
    {
    case UnmappedReason::unknown_contract: return "unknown contract";
    case UnmappedReason::selector_absent: return "selector absent";
    case UnmappedReason::malformed_signature: return "malformed signature";
    }
    return "?";
}

namespace
{
class SignatureParser
{
public:
    explicit SignatureParser(std::string_view s) : s_{s} {}

    void parse()
    {
        if (std::any_of(s_.begin(), s_.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }))
            fail("contains whitespace");
        identifier();
        expect('(');
        type_list();
        expect(')');
        if (pos_ != s_.size())
            fail("trailing characters after parameter list");
    }

private:
    [[noreturn]] void fail(const std::string& why) const
    {
        throw MalformedSignature{"malformed signature \"" + std::string{s_} + "\": " + why};
    }

    bool peek(char c) const noexcept { return pos_ < s_.size() && s_[pos_] == c; }

    void expect(char c)
    {
        if (!peek(c))
            fail(std::string{"expected '"} + c + "'");
        ++pos_;
    }

    static bool ident_start(char c) noexcept
    {
        return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
    }
    static bool ident_char(char c) noexcept
    {
        return ident_start(c) || std::isdigit(static_cast<unsigned char>(c));
    }

    void identifier()
    {
        if (pos_ >= s_.size() || !ident_start(s_[pos_]))
            fail("missing function name");
        while (pos_ < s_.size() && ident_char(s_[pos_]))
            ++pos_;
    }

    void type_list()
    {
        if (peek(')'))
            return;
        type();
        while (peek(','))
        {
            ++pos_;
            type();
        }
    }

    void type()
    {
        if (peek('('))
        {
            ++pos_;
            type_list();
            expect(')');
        }
        else
        {
            const auto begin = pos_;
            while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_])))
                ++pos_;
            elementary(s_.substr(begin, pos_ - begin));
        }
        while (peek('['))
        {
            ++pos_;
            if (std::isdigit(static_cast<unsigned char>(pos_ < s_.size() ? s_[pos_] : 'x')))
            {
                if (s_[pos_] == '0')
                    fail("array length must be positive without leading zeros");
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
                    ++pos_;
            }
            expect(']');
        }
    }

    static std::optional<unsigned> number(std::string_view digits)
    {
        if (digits.empty() || digits.size() > 3 || digits[0] == '0' ||
            !std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
            return std::nullopt;
        unsigned v = 0;
        for (const char c : digits)
            v = v * 10 + static_cast<unsigned>(c - '0');
        return v;
    }

    void elementary(std::string_view t)
    {
        if (t.empty())
            fail("missing parameter type");
        if (t == "address" || t == "bool" || t == "string" || t == "bytes" || t == "function")
            return;
        auto sized = [&](std::string_view prefix) -> std::optional<std::string_view> {
            if (t.starts_with(prefix))
                return t.substr(prefix.size());
            return std::nullopt;
        };
        if (const auto rest = sized("uint").value_or(sized("int").value_or("?")); rest != "?" && !t.starts_with("ufixed"))
        {
            if (rest.empty())
                fail("non-canonical type '" + std::string{t} + "' (use an explicit bit width)");
            const auto n = number(rest);
            if (!n || *n % 8 != 0 || *n > 256)
                fail("invalid integer width in '" + std::string{t} + "'");
            return;
        }
        if (const auto rest = sized("bytes"))
        {
            const auto n = number(*rest);
            if (!n || *n > 32)
                fail("invalid bytesN type '" + std::string{t} + "'");
            return;
        }
        for (const std::string_view prefix : {"ufixed", "fixed"})
            if (const auto rest = sized(prefix))
            {
                const auto x = rest->find('x');
                if (rest->empty() || x == std::string_view::npos)
                    fail("non-canonical type '" + std::string{t} + "' (use fixedMxN)");
                const auto m = number(rest->substr(0, x));
                const auto d = number(rest->substr(x + 1));
                if (!m || *m % 8 != 0 || *m > 256 || !d || *d > 80)
                    fail("invalid fixed-point type '" + std::string{t} + "'");
                return;
            }
        if (t == "byte")
            fail("non-canonical type 'byte' (use bytes1)");
        fail("unknown type '" + std::string{t} + "'");
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

// Storage key of an SLOAD/SSTORE: the pushed constant directly before it, or unknown.
std::optional<std::string> storage_key(const std::vector<const evm::Instruction*>& flat, std::size_t i)
{
    if (i == 0)
        return std::nullopt;
    const auto& prev = *flat[i - 1];
    if (!prev.op().is_push() || prev.truncated)
        return std::nullopt;
    auto bytes = prev.immediate;
    const auto nz = std::find_if(bytes.begin(), bytes.end(), [](std::uint8_t b) { return b != 0; });
    bytes.erase(bytes.begin(), nz);
    return "0x" + to_hex(bytes);
}
}  // namespace

void validate_signature(std::string_view signature)
{
    SignatureParser{signature}.parse();
}

Selector signature_selector(std::string_view signature)
{
    validate_signature(signature);
    const auto h = keccak256(signature);
    return Selector::from_bytes(BytesView{h.data(), 4});
}

ContractSelectors contract_selectors(const cfg::ContractGraph& graph, const cfg::FunctionRecovery& recovery)
{
    ContractSelectors out{graph.code_hash, recovery.selectors, {}};
    for (const auto& [sel, block] : recovery.selectors.entries)
        out.entry_offsets.emplace(sel, graph.blocks[block].start_offset);
    return out;
}

MappingResult map_report(
    const std::vector<DefectRecord>& report, const std::map<std::string, ContractSelectors>& contracts)
{
    MappingResult out;
    for (const auto& record : report)
    {
        Selector sel;
        try
        {
            sel = record.function_signature.empty() && record.selector ?
                      *record.selector :
                      signature_selector(record.function_signature);
        }
        catch (const MalformedSignature& e)
        {
            out.unmapped.push_back({record, UnmappedReason::malformed_signature, e.what()});
            continue;
        }
        const auto it = contracts.find(record.contract_name);
        if (it == contracts.end())
        {
            out.unmapped.push_back({record, UnmappedReason::unknown_contract, record.contract_name});
            continue;
        }
        const auto& entries = it->second.selectors.entries;
        const auto e = entries.find(sel);
        if (e == entries.end())
        {
            out.unmapped.push_back({record, UnmappedReason::selector_absent, sel.hex()});
            continue;
        }
        auto mapped_record = record;
        mapped_record.selector = sel;
        const auto off = it->second.entry_offsets.find(sel);
        const std::uint32_t entry_offset = off == it->second.entry_offsets.end() ? 0 : off->second;
        out.mapped.push_back({std::move(mapped_record),
            cfg::FunctionId{it->second.code_hash, sel, entry_offset}, sel});
    }
    return out;
}

std::vector<DefectRecord> detect_bypass_reentrancy(
    const cfg::FunctionCfg& function, const cfg::PathSet& paths, std::string_view contract_name)
{
    static const std::string unknown = "*";
    for (const auto& path : paths.paths)
    {
        std::vector<const evm::Instruction*> flat;
        for (const auto b : path.blocks)
            for (const auto& ins : function.blocks[b].instructions)
                flat.push_back(&ins);

        std::set<std::string> unwritten_reads;
        std::set<std::string> snapshot;
        std::uint32_t call_offset = 0;
        for (std::size_t i = 0; i < flat.size(); ++i)
        {
            const auto& o = flat[i]->op();
            if (o.is_sload)
            {
                unwritten_reads.insert(storage_key(flat, i).value_or(unknown));
            }
            else if (o.is_external_call)
            {
                snapshot.insert(unwritten_reads.begin(), unwritten_reads.end());
                call_offset = flat[i]->offset;
            }
            else if (o.is_sstore)
            {
                const auto key = storage_key(flat, i);
                const bool hit = !snapshot.empty() &&
                                 (!key || snapshot.contains(unknown) || snapshot.contains(*key));
                if (hit)
                {
                    std::ostringstream ev;
                    ev << "storage key " << key.value_or(unknown)
                       << " read before external call at offset " << call_offset
                       << " and written at offset " << flat[i]->offset;
                    DefectRecord r;
                    r.contract_name = std::string{contract_name};
                    r.selector = function.selector;
                    r.defect_class = DefectClass::BypassAuthReentrancy;
                    r.subtype = "reentrancy";
                    r.source = RecordSource::builtin_detector;
                    r.evidence = ev.str();
                    return {std::move(r)};
                }
                if (key)
                    unwritten_reads.erase(*key);
            }
        }
    }
    return {};
}

std::vector<DefectRecord> detect_bypass_reentrancy(
    const cfg::FunctionCfg& function, std::size_t max_paths, std::string_view contract_name)
{
    return detect_bypass_reentrancy(function, cfg::extract_paths(function, max_paths), contract_name);
}

ParsedReport parse_report_file(std::string_view bytes)
{
    nlohmann::json doc;
    try
    {
        doc = nlohmann::json::parse(bytes);
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ReportSyntaxError{e.what()};
    }
    if (!doc.is_array())
        throw ReportSyntaxError{"report must be a JSON array"};

    static const std::set<std::string> known_keys{"contract", "function", "defect", "subtype", "evidence"};
    ParsedReport out;
    for (std::size_t i = 0; i < doc.size(); ++i)
    {
        const auto& item = doc[i];
        auto bad = [&](std::string msg) { out.errors.push_back({i, std::move(msg)}); };
        if (!item.is_object())
        {
            bad("record is not an object");
            continue;
        }
        std::string unknown_key;
        for (const auto& [k, v] : item.items())
            if (!known_keys.contains(k))
                unknown_key = k;
        if (!unknown_key.empty())
        {
            bad("unknown field \"" + unknown_key + "\"");
            continue;
        }
        auto required = [&](const char* key) -> const nlohmann::json* {
            const auto it = item.find(key);
            if (it == item.end() || !it->is_string())
                return nullptr;
            return &*it;
        };
        const auto* contract = required("contract");
        const auto* function = required("function");
        const auto* defect = required("defect");
        if (!contract || !function || !defect)
        {
            bad("\"contract\", \"function\" and \"defect\" must be strings");
            continue;
        }
        const auto cls = parse_defect_class(defect->get<std::string>());
        if (!cls)
        {
            bad("unknown defect class \"" + defect->get<std::string>() + "\"");
            continue;
        }
        DefectRecord r;
        r.contract_name = contract->get<std::string>();
        r.function_signature = function->get<std::string>();
        r.defect_class = *cls;
        r.source = RecordSource::external_report;
        bool ok = true;
        for (const auto& [key, field] : {std::pair{"subtype", &r.subtype}, std::pair{"evidence", &r.evidence}})
        {
            const auto it = item.find(key);
            if (it == item.end() || it->is_null())
                continue;
            if (!it->is_string())
            {
                bad(std::string{"\""} + key + "\" must be a string");
                ok = false;
                break;
            }
            *field = it->get<std::string>();
        }
        if (ok)
            out.records.push_back(std::move(r));
    }
    return out;
}

}  // namespace deltascan::detectors
