// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#include <deltascan/pipeline.hpp>

#include "binary_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace deltascan::pipeline
{
namespace
{
using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

double ms_since(Clock::time_point start)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(std::string_view key, std::string_view v)
{
    if (v == "on" || v == "true" || v == "yes" || v == "1")
        return true;
    if (v == "off" || v == "false" || v == "no" || v == "0")
        return false;
    throw ConfigError{std::string{key} + ": expected on/off, got '" + std::string{v} + "'"};
}

template <class T>
T parse_number(std::string_view key, std::string_view v)
{
    T out{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError{std::string{key} + ": bad number '" + std::string{v} + "'"};
    return out;
}

std::string selector_hex(const std::optional<Selector>& s)
{
    return s ? s->hex() : std::string{};
}

std::string_view defect_name(const std::optional<detectors::DefectClass>& c)
{
    return c ? detectors::to_string(*c) : std::string_view{"unlabeled"};
}

/// Runs `work(i)` for every i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& work)
{
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            work(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (auto i = next++; i < n; i = next++)
                work(i);
        });
}

/// Delivers results to a sink in index order as they complete.
class OrderedSink
{
public:
    OrderedSink(std::vector<ScanResult>& slots, const ResultSink& sink) : slots_{slots}, sink_{sink}, done_(slots.size()) {}

    void complete(std::size_t i)
    {
        if (!sink_)
            return;
        std::lock_guard lock{mutex_};
        done_[i] = true;
        while (next_ < done_.size() && done_[next_])
            sink_(slots_[next_++]);
    }

private:
    std::vector<ScanResult>& slots_;
    const ResultSink& sink_;
    std::vector<bool> done_;
    std::size_t next_ = 0;
    std::mutex mutex_;
};

json timings_json(const StageTimings& t)
{
    return {{"disassemble", t.disassemble_ms}, {"cfg", t.cfg_ms}, {"detect", t.detect_ms}, {"embed", t.embed_ms},
        {"query", t.query_ms}, {"total", t.total_ms}};
}

json counters_json(const Counters& c)
{
    return {{"functions", c.functions}, {"functions_embedded", c.functions_embedded},
        {"blocks_embedded", c.blocks_embedded}, {"paths_truncated", c.paths_truncated},
        {"blocks_fallback", c.blocks_fallback}, {"unmapped_records", c.unmapped_records}};
}

json record_json(const detectors::DefectRecord& r)
{
    json j{{"contract", r.contract_name}, {"defect", detectors::to_string(r.defect_class)},
        {"source", r.source == detectors::RecordSource::builtin_detector ? "builtin" : "report"}};
    if (!r.function_signature.empty())
        j["function"] = r.function_signature;
    if (r.selector)
        j["selector"] = r.selector->hex();
    if (r.subtype)
        j["subtype"] = *r.subtype;
    if (r.evidence)
        j["evidence"] = *r.evidence;
    return j;
}

json result_json(const ScanResult& r)
{
    json findings = json::array();
    for (const auto& f : r.findings)
        findings.push_back({{"selector", selector_hex(f.selector)}, {"defect", defect_name(f.defect_class)},
            {"max_block_distance", f.max_block_distance},
            {"matched", {{"contract", f.matched.contract_name}, {"function", f.matched.function}}}});
    json j{{"contract", r.contract}, {"source", r.source}, {"code_hash", "0x" + to_hex(r.code_hash)},
        {"findings", std::move(findings)}, {"timings_ms", timings_json(r.timings)},
        {"counters", counters_json(r.counters)}};
    if (!r.detector_records.empty())
    {
        json recs = json::array();
        for (const auto& rec : r.detector_records)
            recs.push_back(record_json(rec));
        j["detector_records"] = std::move(recs);
    }
    if (r.error)
        j["error"] = *r.error;
    return j;
}

std::string run_command(const std::string& command)
{
    std::unique_ptr<FILE, int (*)(FILE*)> pipe{popen(command.c_str(), "r"), pclose};
    if (!pipe)
        throw std::runtime_error{"cannot run compile command"};
    std::string out;
    std::array<char, 4096> buf;
    while (const auto n = std::fread(buf.data(), 1, buf.size(), pipe.get()))
        out.append(buf.data(), n);
    const int status = pclose(pipe.release());
    if (status != 0)
        throw std::runtime_error{"compile command failed: " + command};
    return out;
}

std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (const char c : s)
        out += c == '\'' ? std::string{"'\\''"} : std::string(1, c);
    return out + "'";
}

Model load_model(const PipelineConfig& config)
{
    if (!std::filesystem::exists(config.index_path))
        throw std::runtime_error{"index not found: " + config.index_path.string()};
    return {encoder::Vocabulary::load(vocab_path(config.index_path)),
        encoder::EncoderParams::load(params_path(config.index_path))};
}

void check_dimensions(const PipelineConfig& config, const index::AnnIndex& idx)
{
    if (idx.dim() != config.embedding.block_dim)
        throw ConfigError{"index dimension " + std::to_string(idx.dim()) + " differs from block_dim " +
                          std::to_string(config.embedding.block_dim)};
}

}  // namespace

void PipelineConfig::validate() const
{
    embedding.validate();
    if (!(threshold > 0))
        throw ConfigError{"threshold must be positive"};
    if (workers < 1)
        throw ConfigError{"workers must be at least 1"};
    if (max_paths < 1)
        throw ConfigError{"max_paths must be at least 1"};
    if (!(requests_per_second > 0))
        throw ConfigError{"requests_per_second must be positive"};
    if (!stages.sequence && !stages.graph && !force_stages)
        throw ConfigError{"both encoder stages are off; set force_stages to allow it"};
}

PipelineConfig parse_config(std::string_view text, PipelineConfig c)
{
    std::size_t line_no = 0;
    while (!text.empty())
    {
        ++line_no;
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError{"line " + std::to_string(line_no) + ": expected key = value"};
        const auto key = trim(line.substr(0, eq));
        const auto v = trim(line.substr(eq + 1));
        auto& e = c.embedding;
        if (key == "seed")
            e.seed = parse_number<std::uint64_t>(key, v);
        else if (key == "threshold")
            c.threshold = parse_number<double>(key, v);
        else if (key == "max_paths")
            c.max_paths = parse_number<std::size_t>(key, v);
        else if (key == "index")
            c.index_path = std::string{v};
        else if (key == "cache_dir")
            c.cache_dir = std::string{v};
        else if (key == "api_url")
            c.api_url = v;
        else if (key == "api_key")
            c.api_key = std::string{v};
        else if (key == "requests_per_second")
            c.requests_per_second = parse_number<double>(key, v);
        else if (key == "sequence_encoder")
            c.stages.sequence = parse_bool(key, v);
        else if (key == "graph_encoder")
            c.stages.graph = parse_bool(key, v);
        else if (key == "force_stages")
            c.force_stages = parse_bool(key, v);
        else if (key == "workers")
            c.workers = parse_number<std::size_t>(key, v);
        else if (key == "store_all")
            c.store_all = parse_bool(key, v);
        else if (key == "compile_cmd")
            c.compile_cmd = v;
        else if (key == "m_max")
            e.m_max = parse_number<std::size_t>(key, v);
        else if (key == "alpha")
            e.alpha = parse_number<double>(key, v);
        else if (key == "clip_cap")
            e.clip_cap = parse_number<double>(key, v);
        else if (key == "window")
            e.window = parse_number<std::size_t>(key, v);
        else if (key == "w2v_epochs")
            e.w2v_epochs = parse_number<std::size_t>(key, v);
        else if (key == "random_features")
            e.random_features = parse_number<std::size_t>(key, v);
        else
            throw ConfigError{"line " + std::to_string(line_no) + ": unknown key '" + std::string{key} + "'"};
    }
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base)
{
    return parse_config(io::read_file(path), std::move(base));
}

void apply_environment(PipelineConfig& config)
{
    if (const char* key = std::getenv(api_key_env); key && *key)
        config.api_key = key;
}

std::filesystem::path vocab_path(const std::filesystem::path& index_path)
{
    auto p = index_path;
    p += ".vocab";
    return p;
}

std::filesystem::path params_path(const std::filesystem::path& index_path)
{
    auto p = index_path;
    p += ".params";
    return p;
}

InputSet collect_inputs(const std::vector<std::filesystem::path>& paths)
{
    InputSet out;
    auto add = [&](const std::filesystem::path& p) {
        if (p.extension() == ".json")
            out.reports.push_back(p);
        else
            out.contracts.push_back({p.stem().string(), p});
    };
    for (const auto& p : paths)
    {
        if (!std::filesystem::is_directory(p))
        {
            add(p);
            continue;
        }
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator{p})
        {
            const auto ext = e.path().extension();
            if (e.is_regular_file() && (ext == ".hex" || ext == ".bin" || ext == ".json"))
                files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            add(f);
    }
    return out;
}

Bytes read_bytecode(const std::filesystem::path& path, const PipelineConfig& config)
{
    const auto ext = path.extension();
    if (ext == ".bin")
    {
        const auto raw = io::read_file(path);
        return {raw.begin(), raw.end()};
    }
    if (ext != ".hex" && !config.compile_cmd.empty())
        return from_hex(trim(run_command(config.compile_cmd + " " + shell_quote(path.string()))));
    const auto text = io::read_file(path);
    if (ext == ".hex" || looks_like_hex(text))
        return from_hex(text);
    if (std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isspace(ch); }))
        return {};
    return {text.begin(), text.end()};
}

std::string to_json_line(const ScanResult& result)
{
    return result_json(result).dump();
}

Analysis analyze(BytesView code, StageTimings* timings)
{
    Analysis a;
    auto t = Clock::now();
    a.program = evm::load_runtime_code(code);
    if (timings)
        timings->disassemble_ms = ms_since(t);
    t = Clock::now();
    a.graph = cfg::build_contract_graph(a.program);
    a.recovery = cfg::recover_functions(a.graph);
    if (timings)
        timings->cfg_ms = ms_since(t);
    return a;
}

std::vector<encoder::FunctionEmbedding> embed_functions(const Analysis& analysis, const Model& model,
    const PipelineConfig& config, const std::function<bool(const cfg::FunctionCfg&)>& select,
    encoder::StageToggles stages, Counters* counters)
{
    std::vector<encoder::FunctionEmbedding> out;
    std::atomic<std::uint64_t> truncated{0};
    encoder::SequenceCache cache;
    for (const auto& f : analysis.recovery.functions)
    {
        if (f.blocks.empty() || (select && !select(f)))
            continue;
        const auto paths = cfg::extract_paths(f, config.max_paths);
        out.push_back(
            encoder::embed_function(f, paths, model.vocab, model.params, config.embedding, stages, &truncated, &cache));
        if (counters)
        {
            ++counters->functions_embedded;
            counters->blocks_embedded += static_cast<std::size_t>(out.back().blocks.rows());
            counters->blocks_fallback += out.back().fallback_count();
        }
    }
    if (counters)
    {
        counters->functions = analysis.recovery.functions.size();
        counters->paths_truncated += truncated.load();
    }
    return out;
}

std::string to_json(const EmbedSummary& s)
{
    json contracts = json::array();
    for (const auto& c : s.contracts)
        contracts.push_back(result_json(c));
    json unmapped = json::array();
    for (const auto& u : s.unmapped)
    {
        auto j = record_json(u.record);
        j["reason"] = detectors::to_string(u.reason);
        j["detail"] = u.detail;
        unmapped.push_back(std::move(j));
    }
    json errors = json::array();
    for (const auto& e : s.report_errors)
        errors.push_back({{"index", e.index}, {"message", e.message}});
    return json{{"contracts_processed", s.contracts.size()}, {"functions_stored", s.functions_stored},
        {"entries_stored", s.entries_stored}, {"duplicates_skipped", s.duplicates_skipped},
        {"unmapped_records", std::move(unmapped)}, {"report_errors", std::move(errors)},
        {"mean_contract_ms", s.mean_contract_ms}, {"contracts", std::move(contracts)}}
        .dump(2);
}

EmbedSummary cmd_embed(const PipelineConfig& config, const InputSet& inputs)
{
    config.validate();
    EmbedSummary summary;

    std::vector<detectors::DefectRecord> external;
    for (const auto& report : inputs.reports)
    {
        try
        {
            auto parsed = detectors::parse_report_file(io::read_file(report));
            external.insert(external.end(), parsed.records.begin(), parsed.records.end());
            for (auto& e : parsed.errors)
                summary.report_errors.push_back({e.index, report.string() + ": " + e.message});
        }
        catch (const std::exception& e)
        {
            summary.report_errors.push_back({0, report.string() + ": " + e.what()});
        }
    }

    const auto n = inputs.contracts.size();
    summary.contracts.resize(n);
    std::vector<std::optional<Analysis>> analyses(n);
    std::vector<Clock::duration> elapsed(n);
    parallel_for(n, config.workers, [&](std::size_t i) {
        const auto start = Clock::now();
        auto& r = summary.contracts[i];
        r.contract = inputs.contracts[i].name;
        r.source = inputs.contracts[i].path.string();
        try
        {
            auto a = analyze(read_bytecode(inputs.contracts[i].path, config), &r.timings);
            r.code_hash = a.graph.code_hash;
            const auto t = Clock::now();
            for (const auto& f : a.recovery.functions)
            {
                auto recs = detectors::detect_bypass_reentrancy(f, config.max_paths, r.contract);
                r.detector_records.insert(r.detector_records.end(), recs.begin(), recs.end());
            }
            r.timings.detect_ms = ms_since(t);
            analyses[i] = std::move(a);
        }
        catch (const std::exception& e)
        {
            r.error = e.what();
        }
        elapsed[i] = Clock::now() - start;
    });

    // Identical code is analyzed once; later copies only lend their name.
    std::map<Hash256, std::size_t> first_of;
    std::vector<std::size_t> canonical(n);
    std::map<std::string, detectors::ContractSelectors> selectors;
    std::vector<std::vector<std::string>> corpus;
    for (std::size_t i = 0; i < n; ++i)
    {
        if (!analyses[i])
            continue;
        const auto [it, fresh] = first_of.emplace(analyses[i]->graph.code_hash, i);
        canonical[i] = it->second;
        if (fresh)
            corpus.push_back(encoder::contract_tokens(analyses[i]->program));
        else
            ++summary.duplicates_skipped;
        selectors[inputs.contracts[i].name] =
            detectors::contract_selectors(analyses[i]->graph, analyses[i]->recovery);
    }
    if (corpus.empty())
        throw std::runtime_error{"no contract could be analyzed"};

    std::vector<detectors::DefectRecord> records = external;
    for (std::size_t i = 0; i < n; ++i)
        records.insert(records.end(), summary.contracts[i].detector_records.begin(),
            summary.contracts[i].detector_records.end());
    auto mapping = detectors::map_report(records, selectors);
    summary.unmapped = std::move(mapping.unmapped);
    for (const auto& u : summary.unmapped)
    {
        for (std::size_t i = 0; i < n; ++i)
            if (inputs.contracts[i].name == u.record.contract_name)
                ++summary.contracts[i].counters.unmapped_records;
    }

    struct Labels
    {
        std::map<std::optional<detectors::DefectClass>, std::string> defects;
    };
    // canonical contract -> selector -> defect classes with the reported name
    std::map<std::size_t, std::map<Selector, Labels>> defective;
    std::map<std::string, std::size_t> by_name;
    for (std::size_t i = 0; i < n; ++i)
        if (analyses[i])
            by_name.emplace(inputs.contracts[i].name, canonical[i]);
    for (const auto& m : mapping.mapped)
    {
        const auto it = by_name.find(m.record.contract_name);
        if (it == by_name.end())
            continue;
        auto& name = defective[it->second][m.selector].defects[m.record.defect_class];
        if (!m.record.function_signature.empty() && (name.empty() || name == m.selector.hex()))
            name = m.record.function_signature;
        else if (name.empty())
            name = m.selector.hex();
    }

    const Model model{encoder::train_vocabulary(corpus, config.embedding), encoder::make_params(config.embedding)};

    std::vector<std::vector<encoder::FunctionEmbedding>> embedded(n);
    parallel_for(n, config.workers, [&](std::size_t i) {
        if (!analyses[i] || canonical[i] != i)
            return;
        const auto start = Clock::now();
        auto& r = summary.contracts[i];
        const auto& wanted = defective[i];
        try
        {
            const auto t = Clock::now();
            embedded[i] = embed_functions(
                *analyses[i], model, config,
                [&](const cfg::FunctionCfg& f) {
                    return f.selector && (config.store_all || wanted.contains(*f.selector));
                },
                config.stages, &r.counters);
            r.timings.embed_ms = ms_since(t);
        }
        catch (const std::exception& e)
        {
            r.error = e.what();
        }
        elapsed[i] += Clock::now() - start;
        analyses[i].reset();
    });

    index::AnnIndex idx{index::IndexParams{.dim = config.embedding.block_dim, .seed = config.embedding.seed}};
    for (std::size_t i = 0; i < n; ++i)
    {
        const auto& contract = defective[i];
        for (const auto& e : embedded[i])
        {
            Labels labels;
            if (const auto it = contract.find(*e.selector); it != contract.end())
                labels = it->second;
            else
                labels.defects[std::nullopt] = e.selector->hex();
            for (const auto& [cls, function] : labels.defects)
            {
                index::EntryLabel label;
                label.contract_name = inputs.contracts[i].name;
                label.function = function;
                label.code_hash = e.function_id.code_hash;
                label.selector = *e.selector;
                label.defect_class = cls;
                for (Eigen::Index b = 0; b < e.blocks.rows(); ++b)
                {
                    label.block_id = static_cast<std::uint32_t>(b);
                    idx.insert({e.blocks.data() + b * e.blocks.cols(), static_cast<std::size_t>(e.blocks.cols())},
                        label);
                    ++summary.entries_stored;
                }
                ++summary.functions_stored;
            }
        }
    }
    idx.save(config.index_path);
    model.vocab.save(vocab_path(config.index_path));
    model.params.save(params_path(config.index_path));

    double total = 0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < n; ++i)
    {
        auto& r = summary.contracts[i];
        r.timings.total_ms = std::chrono::duration<double, std::milli>(elapsed[i]).count();
        if (!r.error)
        {
            total += r.timings.total_ms;
            ++ok;
        }
    }
    summary.mean_contract_ms = ok ? total / static_cast<double>(ok) : 0.0;
    return summary;
}

std::vector<ScanResult> detect_with(const PipelineConfig& config, const Model& model, const index::AnnIndex& idx,
    const std::vector<ContractInput>& inputs, encoder::StageToggles stages, double threshold,
    const ResultSink& sink)
{
    check_dimensions(config, idx);
    std::vector<ScanResult> results(inputs.size());
    OrderedSink ordered{results, sink};
    parallel_for(inputs.size(), config.workers, [&](std::size_t i) {
        const auto start = Clock::now();
        auto& r = results[i];
        r.contract = inputs[i].name;
        r.source = inputs[i].path.string();
        try
        {
            const auto a = analyze(read_bytecode(inputs[i].path, config), &r.timings);
            r.code_hash = a.graph.code_hash;
            auto t = Clock::now();
            const auto embeddings = embed_functions(a, model, config, {}, stages, &r.counters);
            r.timings.embed_ms = ms_since(t);
            t = Clock::now();
            for (const auto& e : embeddings)
            {
                auto found = index::decide_similar(e, idx, threshold);
                r.findings.insert(r.findings.end(), std::make_move_iterator(found.begin()),
                    std::make_move_iterator(found.end()));
            }
            r.timings.query_ms = ms_since(t);
        }
        catch (const std::exception& e)
        {
            r.error = e.what();
        }
        r.timings.total_ms = ms_since(start);
        ordered.complete(i);
    });
    return results;
}

std::vector<ScanResult> cmd_detect(
    const PipelineConfig& config, const std::vector<ContractInput>& inputs, const ResultSink& sink)
{
    config.validate();
    const auto model = load_model(config);
    const auto idx = index::AnnIndex::load(config.index_path);
    return detect_with(config, model, idx, inputs, config.stages, config.threshold, sink);
}

std::vector<AblationRow> cmd_ablate(
    const PipelineConfig& config, const std::vector<ContractInput>& inputs, const std::vector<double>& thresholds)
{
    config.validate();
    if (thresholds.empty())
        throw ConfigError{"no thresholds given"};
    for (const double t : thresholds)
        if (!(t > 0))
            throw ConfigError{"thresholds must be positive"};
    const auto model = load_model(config);
    const auto idx = index::AnnIndex::load(config.index_path);
    const double widest = *std::max_element(thresholds.begin(), thresholds.end());

    const std::vector<std::pair<std::string, encoder::StageToggles>> variants{
        {"full", {true, true}}, {"-sequence", {false, true}}, {"-graph", {true, false}}, {"-both", {false, false}}};
    std::vector<AblationRow> rows;
    for (const auto& [name, stages] : variants)
    {
        const auto results = detect_with(config, model, idx, inputs, stages, widest);
        for (const double t : thresholds)
        {
            AblationRow row{name, t, 0, 0};
            for (const auto& r : results)
            {
                std::set<cfg::FunctionId> matched;
                for (const auto& f : r.findings)
                    if (f.max_block_distance <= t)
                    {
                        ++row.findings;
                        matched.insert(f.function_id);
                    }
                row.functions_matched += matched.size();
            }
            rows.push_back(row);
        }
    }
    return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows)
{
    std::ostringstream out;
    out << "variant\tthreshold\tfindings\tfunctions\n";
    for (const auto& r : rows)
        out << r.variant << '\t' << r.threshold << '\t' << r.findings << '\t' << r.functions_matched << '\n';
    return out.str();
}

std::string disassembly_text(const evm::Program& program)
{
    std::ostringstream out;
    char offset[16];
    for (const auto& ins : program.instructions)
    {
        std::snprintf(offset, sizeof offset, "%06x", ins.offset);
        out << offset << ' ' << ins.mnemonic();
        if (!ins.immediate.empty())
            out << " 0x" << to_hex(ins.immediate);
        if (ins.truncated)
            out << " (truncated)";
        out << '\n';
    }
    return out.str();
}

}  // namespace deltascan::pipeline
