// deltascan: permission-control vulnerability scanner for EVM contracts
// Copyright 2026 The deltascan Authors.
// SPDX-License-Identifier: Apache-2.0
#include <deltascan/pipeline.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace deltascan;

namespace
{
struct Flags
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<double> threshold;
    std::optional<std::size_t> max_paths;
    std::optional<std::string> index;
    std::optional<std::size_t> workers;
    std::optional<std::string> compile_cmd;
    bool no_seq = false;
    bool no_graph = false;
};

pipeline::PipelineConfig resolve(const Flags& f)
{
    pipeline::PipelineConfig c;
    if (!f.config.empty())
        c = pipeline::load_config(f.config, c);
    pipeline::apply_environment(c);
    if (f.seed)
        c.embedding.seed = *f.seed;
    if (f.threshold)
        c.threshold = *f.threshold;
    if (f.max_paths)
        c.max_paths = *f.max_paths;
    if (f.index)
        c.index_path = *f.index;
    if (f.workers)
        c.workers = *f.workers;
    if (f.compile_cmd)
        c.compile_cmd = *f.compile_cmd;
    if (f.no_seq)
        c.stages.sequence = false;
    if (f.no_graph)
        c.stages.graph = false;
    return c;
}

std::vector<std::filesystem::path> as_paths(const std::vector<std::string>& v)
{
    return {v.begin(), v.end()};
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"deltascan: permission-control vulnerability scanner for EVM bytecode"};
    app.require_subcommand(1);
    Flags flags;
    app.add_option("--config", flags.config, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", flags.seed, "global random seed");
    app.add_option("--threshold", flags.threshold, "decision threshold on block distance");
    app.add_option("--max-paths", flags.max_paths, "execution paths per function");
    app.add_option("--index", flags.index, "vector index file");
    app.add_option("--workers", flags.workers, "contracts processed in parallel");
    app.add_option("--compile-cmd", flags.compile_cmd, "command printing runtime bytecode hex for a source file");
    app.add_flag("--no-seq", flags.no_seq, "disable the sequence encoder");
    app.add_flag("--no-graph", flags.no_graph, "disable the graph encoder");

    std::string file;
    auto* disasm = app.add_subcommand("disasm", "print the instructions of a bytecode file");
    disasm->add_option("file", file)->required();
    auto* cfg_cmd = app.add_subcommand("cfg", "print the recovered control flow graph");
    cfg_cmd->add_option("file", file)->required();

    std::vector<std::string> inputs;
    bool store_all = false;
    auto* embed = app.add_subcommand("embed", "label contracts and store defective functions in the index");
    embed->add_option("inputs", inputs, "bytecode files, report .json files or directories")->required();
    embed->add_flag("--store-all", store_all, "store every function, not only defective ones");

    auto* detect = app.add_subcommand("detect", "scan contracts against the index, one JSON line each");
    detect->add_option("inputs", inputs, "bytecode files or directories")->required();

    std::vector<std::string> addresses;
    std::optional<std::string> api_url, cache_dir;
    std::optional<double> rps;
    auto* fetch = app.add_subcommand("fetch", "download runtime bytecode into the cache");
    fetch->add_option("addresses", addresses)->required();
    fetch->add_option("--api-url", api_url, "explorer API endpoint");
    fetch->add_option("--cache-dir", cache_dir, "bytecode cache directory");
    fetch->add_option("--rate", rps, "requests per second");

    std::vector<double> thresholds = pipeline::default_ablation_thresholds;
    auto* ablate = app.add_subcommand("ablate", "finding counts per encoder variant and threshold");
    ablate->add_option("inputs", inputs, "bytecode files or directories")->required();
    ablate->add_option("--thresholds", thresholds, "decision thresholds")->delimiter(',');

    for (auto* sub : {disasm, cfg_cmd, embed, detect, fetch, ablate})
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try
    {
        auto config = resolve(flags);
        if (*disasm || *cfg_cmd)
        {
            const auto program = evm::load_runtime_code(pipeline::read_bytecode(file, config));
            if (*disasm)
            {
                std::cout << pipeline::disassembly_text(program);
                return 0;
            }
            const auto graph = cfg::build_contract_graph(program);
            std::cout << cfg::describe(graph, cfg::recover_functions(graph));
            return 0;
        }
        if (*embed)
        {
            config.store_all = config.store_all || store_all;
            const auto summary = pipeline::cmd_embed(config, pipeline::collect_inputs(as_paths(inputs)));
            std::cout << pipeline::to_json(summary) << '\n';
            return 0;
        }
        if (*detect)
        {
            bool failed = false;
            pipeline::cmd_detect(config, pipeline::collect_inputs(as_paths(inputs)).contracts,
                [&](const pipeline::ScanResult& r) {
                    failed = failed || r.error.has_value();
                    std::cout << pipeline::to_json_line(r) << std::endl;
                });
            return failed ? 1 : 0;
        }
        if (*fetch)
        {
            if (api_url)
                config.api_url = *api_url;
            if (cache_dir)
                config.cache_dir = *cache_dir;
            if (rps)
                config.requests_per_second = *rps;
            bool failed = false;
            for (const auto& r : pipeline::cmd_fetch(addresses, config, pipeline::http_transport()))
            {
                failed = failed || r.status == pipeline::FetchStatus::failed;
                std::cout << r.address << '\t' << pipeline::to_string(r.status) << '\t' << r.path.string();
                if (!r.message.empty())
                    std::cout << '\t' << r.message;
                std::cout << '\n';
            }
            return failed ? 1 : 0;
        }
        if (*ablate)
        {
            const auto rows = pipeline::cmd_ablate(config, pipeline::collect_inputs(as_paths(inputs)).contracts, thresholds);
            std::cout << pipeline::format_ablation(rows);
            return 0;
        }
    }
    catch (const std::exception& e)
    {
        std::cerr << "deltascan: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
