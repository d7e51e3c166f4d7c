#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "srlab/bench.hpp"
#include "srlab/canon.hpp"
#include "srlab/ted.hpp"

using namespace srlab;

namespace {

std::vector<std::string> split_list(std::string const& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// "--seeds 30" is a count; "--seeds 0,4,7" lists replicate indices.
void apply_seeds(BenchConfig& cfg, std::string const& text)
{
    auto const items = split_list(text);
    if (items.empty()) throw std::invalid_argument("--seeds: empty");
    auto parse = [](std::string const& s) {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("--seeds: bad number '" + s + "'");
        return static_cast<std::uint64_t>(v);
    };
    if (items.size() == 1 && text.find(',') == std::string::npos) {
        cfg.set_seed_count(parse(items[0]));
        return;
    }
    cfg.replicates.clear();
    for (auto const& i : items) cfg.replicates.push_back(parse(i));
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Symbolic-regression benchmark laboratory"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run the benchmark matrix into a record store");
    std::string configPath, problems, methods, seeds, variant, out;
    std::size_t parallelism = 0;
    run->add_option("--config", configPath, "JSON config file")->check(CLI::ExistingFile);
    run->add_option("--problems", problems, "Comma-separated problem names");
    run->add_option("--methods", methods, "Comma-separated methods, e.g. bfgs,bfgs:random,noopt");
    run->add_option("--seeds", seeds, "Seed count, or a comma-separated list of replicate indices");
    run->add_option("--variant", variant, "standard, specific or both");
    run->add_option("--out", out, "Output directory (default $SRLAB_OUT_DIR or ./results)");
    run->add_option("--parallelism", parallelism, "Worker threads");

    auto* report = app.add_subcommand("report", "Build reports from a record store");
    std::string store, reportOut, reportConfig;
    long tedMax = 10;
    report->add_option("--store", store, "Record store (CSV or JSON; default <out>/records.csv)");
    report->add_option("--out", reportOut, "Report directory (default <store dir>/reports)");
    report->add_option("--config", reportConfig, "Config file, for custom problems and ted_max")->check(CLI::ExistingFile);
    report->add_option("--ted-max", tedMax, "Largest TED on the heatmap axis");

    auto* canon = app.add_subcommand("canon", "Print the canonical form of an expression");
    std::string expr;
    int precision = 15;
    canon->add_option("expr", expr, "Prefix expression, e.g. \"(add x 1)\"")->required();
    canon->add_option("--precision", precision, "Significant digits kept on constants");

    auto* tedCmd = app.add_subcommand("ted", "Tree edit distance between two expressions");
    std::string lhs, rhs;
    bool raw = false;
    tedCmd->add_option("a", lhs, "First expression")->required();
    tedCmd->add_option("b", rhs, "Second expression")->required();
    tedCmd->add_flag("--raw", raw, "Compare the trees as written, without canonicalization");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            BenchConfig cfg = configPath.empty() ? BenchConfig{} : load_config(configPath);
            if (!problems.empty()) cfg.problems = split_list(problems);
            if (!methods.empty()) {
                cfg.methods.clear();
                for (auto const& m : split_list(methods)) cfg.methods.push_back(parse_method(m));
            }
            if (!seeds.empty()) apply_seeds(cfg, seeds);
            if (!variant.empty()) {
                if (variant == "both") cfg.variants = {Variant::Standard, Variant::Specific};
                else if (auto v = variant_from_name(variant)) cfg.variants = {*v};
                else throw std::invalid_argument("--variant: expected standard, specific or both");
            }
            if (!out.empty()) cfg.output_dir = out;
            if (parallelism) cfg.parallelism = parallelism;
            cfg.validate();

            auto const outcome = run_benchmark(cfg);
            std::printf("%zu run, %zu already stored, %zu failed -> %s\n", outcome.executed, outcome.skipped,
                        outcome.errors.size(), (cfg.output_dir / "records.csv").string().c_str());
            return outcome.errors.empty() ? 0 : 3;
        }
        if (*report) {
            ReportConfig rc;
            rc.ted_max = tedMax;
            if (!reportConfig.empty()) {
                auto const cfg = load_config(reportConfig);
                rc.custom_problems = cfg.custom_problems;
                if (report->count("--ted-max") == 0) rc.ted_max = cfg.ted_max;
            }
            namespace fs = std::filesystem;
            fs::path const storePath = store.empty() ? default_output_dir() / "records.csv" : fs::path(store);
            fs::path const dir = reportOut.empty() ? storePath.parent_path() / "reports" : fs::path(reportOut);
            auto const files = build_reports(load_records(storePath), rc, dir);
            std::printf("%zu files -> %s\n", files.size(), dir.string().c_str());
            return 0;
        }
        if (*canon) {
            CanonConfig cc;
            cc.precision = precision;
            auto const c = canonicalize(parse_prefix(expr), cc);
            std::printf("%s\n", to_prefix(c.tree).c_str());
            std::printf("%s\n", to_prefix(substitute_params(c.tree, c.values)).c_str());
            return 0;
        }
        if (*tedCmd) {
            auto const a = parse_prefix(lhs), b = parse_prefix(rhs);
            long const d = raw ? std::lround(ted(as_labeled(a), as_labeled(b))) : ted_canonical(a, b, CanonConfig{});
            std::printf("%ld\n", d);
            return 0;
        }
    }
    catch (std::exception const& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
