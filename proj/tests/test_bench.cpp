#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "srlab/bench.hpp"
#include "srlab/metrics.hpp"
#include "srlab/ted.hpp"

using namespace srlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(std::string const& name)
{
    fs::path const p = fs::temp_directory_path() / ("srlab_test_bench_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(fs::path const& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Store text with the train_time_s column blanked.
std::string without_times(std::string const& csv)
{
    auto recs = records_from_csv(csv);
    for (auto& r : recs) r.train_time_s = 0.0;
    return records_to_csv(recs);
}

BenchConfig tiny(fs::path const& out)
{
    BenchConfig cfg;
    cfg.problems = {"F1"};
    cfg.methods = {parse_method("noopt"), parse_method("ls")};
    cfg.set_seed_count(3);
    cfg.gp.population_size = 12;
    cfg.gp.generations = 3;
    cfg.output_dir = out;
    cfg.parallelism = 2;
    return cfg;
}

RunRecord record(std::string method, std::string init, double mse, std::optional<double> r2, long ted, long size)
{
    RunRecord r;
    r.problem = "F1";
    r.variant = "standard";
    r.method = std::move(method);
    r.init = std::move(init);
    r.run_id = r.problem + "/" + r.variant + "/" + r.method + "/" + r.init + "/" + std::to_string(ted) + "_" +
               std::to_string(size);
    r.mse = mse;
    r.r2 = r2;
    r.ted = ted;
    r.size = size;
    r.train_time_s = 0.25;
    r.expr_raw = "(add x 1)";
    r.expr_canonical = "(add 1 x)";
    return r;
}

// FNV-1a 64 with a 0xff separator after each field, then splitmix64.
std::uint64_t reference_seed(std::vector<std::string> const& fields)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (auto const& f : fields) {
        for (unsigned char c : f) h = (h ^ c) * 1099511628211ULL;
        h = (h ^ 0xffu) * 1099511628211ULL;
    }
    std::uint64_t z = h + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

TEST_CASE("method rows")
{
    auto const rows = default_methods();
    REQUIRE(rows.size() == 12);
    std::vector<std::string> labels;
    for (auto const& m : rows) labels.push_back(method_label(std::string(kind_name(m.kind)), std::string(init_name(m.init))));
    CHECK(labels == std::vector<std::string>{"BFGS", "BFGS Random", "CG", "CG Random", "LS", "LS Random", "PSO",
                                             "Nelder-Mead", "Nelder-Mead Random", "NoOpt", "Differential Evolution",
                                             "Dual Annealing"});
    for (auto const& m : rows) CHECK(parse_method(method_spelling(m)) == m);
    CHECK(parse_method("bfgs:random").init == InitStrategy::RandomNormal);
    CHECK_THROWS_AS(parse_method("sgd"), std::invalid_argument);
    CHECK_THROWS_AS(parse_method("bfgs:zero"), std::invalid_argument);
}

TEST_CASE("config parsing")
{
    SUBCASE("defaults")
    {
        BenchConfig const cfg;
        CHECK(cfg.replicates.size() == 30);
        CHECK(cfg.problems.size() == builtin_problems().size());
        CHECK(cfg.variants == std::vector<Variant>{Variant::Standard});
        CHECK(cfg.methods == default_methods());
        CHECK_NOTHROW(cfg.validate());
    }
    SUBCASE("every key is applied")
    {
        auto const cfg = parse_config(R"j({
            "problems": ["F1", "toy"], "variants": ["standard", "specific"], "methods": ["noopt", "cg:random"],
            "seeds": [4, 9], "master_seed": 77, "population_size": 40, "generations": 7, "tournament_size": 2,
            "crossover_prob": 0.8, "mutation_prob": 0.2, "max_depth": 6, "max_size": 30, "elitism": 2,
            "init_depth": 4, "budget": 50, "tolerance": 1e-10, "swarm_size": 10, "precision": 12,
            "max_rewrite_passes": 4, "output_dir": "somewhere", "parallelism": 3, "ted_max": 6,
            "custom_problems": [{"name": "toy", "target": "(add x 2)", "lo": 0, "hi": 1, "n_points": 20,
                                 "specific_ops": ["sin"]}]
        })j");
        CHECK(cfg.problems == std::vector<std::string>{"F1", "toy"});
        CHECK(cfg.variants.size() == 2);
        CHECK(cfg.methods == std::vector<MethodRow>{parse_method("noopt"), parse_method("cg:random")});
        CHECK(cfg.replicates == std::vector<std::uint64_t>{4, 9});
        CHECK(cfg.gp.seed == 77);
        CHECK(cfg.gp.population_size == 40);
        CHECK(cfg.gp.generations == 7);
        CHECK(cfg.gp.tournament_size == 2);
        CHECK(cfg.gp.crossover_prob == 0.8);
        CHECK(cfg.gp.mutation_prob == 0.2);
        CHECK(cfg.gp.max_depth == 6);
        CHECK(cfg.gp.max_size == 30);
        CHECK(cfg.gp.elitism == 2);
        CHECK(cfg.gp.init_depth == 4);
        CHECK(cfg.opt.budget == 50);
        CHECK(cfg.opt.tolerance == 1e-10);
        CHECK(cfg.opt.population == 10);
        CHECK(cfg.canon.precision == 12);
        CHECK(cfg.canon.max_rewrite_passes == 4);
        CHECK(cfg.output_dir == fs::path("somewhere"));
        CHECK(cfg.parallelism == 3);
        CHECK(cfg.ted_max == 6);
        REQUIRE(cfg.problem("toy"));
        CHECK(cfg.problem("toy")->n_points == 20);
        CHECK(cfg.problem("toy")->specific_ops == std::vector<Op>{Op::Sin});
    }
    SUBCASE("seed count")
    {
        CHECK(parse_config(R"({"seeds": 5})").replicates == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
    }
    SUBCASE("errors")
    {
        CHECK_THROWS_AS(parse_config(R"({"generation": 3})"), std::invalid_argument);
        CHECK_THROWS_AS(parse_config(R"({"problems": ["F2"]})"), std::invalid_argument);
        CHECK_THROWS_AS(parse_config(R"({"problems": []})"), std::invalid_argument);
        CHECK_THROWS_AS(parse_config(R"({"seeds": 0})"), std::invalid_argument);
        CHECK_THROWS_AS(parse_config(R"({"seeds": -2})"), std::invalid_argument);
        CHECK_THROWS_AS(parse_config(R"({"methods": ["adam"]})"), std::invalid_argument);
        CHECK_THROWS_AS(parse_config(R"({"variants": ["both"]})"), std::invalid_argument);
        CHECK_THROWS_AS(parse_config(R"({"elitism": 500})"), std::invalid_argument);
        CHECK_THROWS_AS(parse_config(R"([1, 2])"), std::invalid_argument);
        CHECK_THROWS_AS(parse_config("{"), std::invalid_argument);
        CHECK_THROWS_AS(parse_config(R"j({"custom_problems": [{"name": "bad", "target": "(ln x)", "lo": -1, "hi": 1}]})j"),
                        std::invalid_argument);
        CHECK_THROWS_AS(load_config("/nonexistent/config.json"), std::invalid_argument);
    }
}

TEST_CASE("output directory from the environment")
{
    ::setenv("SRLAB_OUT_DIR", "/tmp/elsewhere", 1);
    CHECK(default_output_dir() == fs::path("/tmp/elsewhere"));
    CHECK(BenchConfig{}.output_dir == fs::path("/tmp/elsewhere"));
    ::unsetenv("SRLAB_OUT_DIR");
    CHECK(default_output_dir() == fs::path("results"));
}

TEST_CASE("matrix and seeds")
{
    BenchConfig cfg = tiny("unused");
    auto const cells = expand_matrix(cfg);
    CHECK(cells.size() == 6);
    CHECK(cells.front().run_id() == "F1/standard/noopt/current/0");
    CHECK(cells.back().run_id() == "F1/standard/ls/current/2");

    Cell const c{"F1", Variant::Specific, parse_method("bfgs:random"), 3};
    CHECK(cell_seed(c, 42) == reference_seed({"F1", "specific", "bfgs", "random", "3", "42"}));

    // Adding a method leaves existing cells' seeds untouched.
    auto seeds_of = [](BenchConfig const& b) {
        std::map<std::string, std::uint64_t> m;
        for (auto const& cell : expand_matrix(b)) m[cell.run_id()] = cell_seed(cell, b.gp.seed);
        return m;
    };
    auto const before = seeds_of(cfg);
    cfg.methods.push_back(parse_method("pso"));
    auto const after = seeds_of(cfg);
    for (auto const& [id, s] : before) CHECK(after.at(id) == s);
    std::set<std::uint64_t> distinct;
    for (auto const& [_, s] : after) distinct.insert(s);
    CHECK(distinct.size() == after.size());
}

TEST_CASE("run_benchmark")
{
    auto const dir = scratch("run");
    auto const cfg = tiny(dir);
    auto const first = run_benchmark(cfg);
    CHECK(first.executed == 6);
    CHECK(first.records.size() == 6);
    CHECK(first.errors.empty());
    CHECK_FALSE(fs::exists(dir / "errors.csv"));
    auto const store = slurp(dir / "records.csv");
    CHECK(records_from_csv(store) == first.records);

    SUBCASE("records are scored consistently")
    {
        auto const target = find_problem("F1")->target;
        for (auto const& r : first.records) {
            auto const tree = parse_prefix(r.expr_raw);
            CHECK(r.size == static_cast<long>(size(tree)));
            CHECK(r.ted == ted_canonical(tree, target, cfg.canon));
            auto const data = sample_dataset(*find_problem("F1"));
            auto const y = evaluate(tree, ParamVector(0), data.xs);
            REQUIRE(y);
            CHECK(r.mse == doctest::Approx(mse(data.ys, *y)).epsilon(1e-12));
            CHECK(r.train_time_s > 0.0);
        }
    }
    SUBCASE("a complete store is left alone")
    {
        auto const again = run_benchmark(cfg);
        CHECK(again.executed == 0);
        CHECK(again.skipped == 6);
        CHECK(slurp(dir / "records.csv") == store);
    }
    SUBCASE("an interrupted store resumes to the same result")
    {
        std::istringstream in(store);
        std::string line, cut;
        for (int i = 0; i < 3 && std::getline(in, line); ++i) cut += line + "\n";
        std::getline(in, line);
        cut += line.substr(0, line.size() / 2); // torn write
        {
            std::ofstream out(dir / "records.csv", std::ios::binary | std::ios::trunc);
            out << cut;
        }
        auto const resumed = run_benchmark(cfg);
        CHECK(resumed.skipped == 2);
        CHECK(resumed.executed == 4);
        CHECK(without_times(slurp(dir / "records.csv")) == without_times(store));
    }
    SUBCASE("a fresh directory reproduces the store")
    {
        auto const other = scratch("run_other");
        auto cfg2 = cfg;
        cfg2.output_dir = other;
        cfg2.parallelism = 1;
        run_benchmark(cfg2);
        CHECK(without_times(slurp(other / "records.csv")) == without_times(store));
        fs::remove_all(other);
    }
    fs::remove_all(dir);
}

TEST_CASE("failing cells are logged and do not stop the matrix")
{
    auto const dir = scratch("fail");
    auto cfg = tiny(dir);
    ProblemSpec broken = *find_problem("F1");
    broken.name = "broken";
    broken.n_points = 0; // sampling throws inside the cell
    cfg.custom_problems.push_back(broken);
    cfg.problems = {"broken", "F1"};
    cfg.methods = {parse_method("noopt")};
    cfg.set_seed_count(2);
    auto const outcome = run_benchmark(cfg);
    CHECK(outcome.records.size() == 2);
    CHECK(outcome.errors.size() == 2);
    auto const errors = slurp(dir / "errors.csv");
    CHECK(errors.rfind("run_id,message\n", 0) == 0);
    CHECK(errors.find("broken/standard/noopt/current/0") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("record export")
{
    auto r = record("bfgs", "random", 1.5e-7, std::nullopt, 3, 9);
    r.expr_raw = "weird, \"quoted\"\nexpr";
    r.seed = 18446744073709551615ULL;
    auto s = record("noopt", "current", std::numeric_limits<double>::infinity(), 0.25, 7, 11);
    s.train_time_s = 0.1 + 0.2;

    SUBCASE("one record is two CSV lines")
    {
        auto const csv = records_to_csv({record("ls", "current", 0.0, 1.0, 0, 5)});
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
        CHECK(csv.rfind(std::string(record_csv_header()) + "\n", 0) == 0);
    }
    SUBCASE("undefined r2 is an empty field and null")
    {
        auto const csv = records_to_csv({record("ls", "current", 2.0, std::nullopt, 0, 5)});
        CHECK(csv.find(",2,,0,5,") != std::string::npos);
        CHECK(records_to_json({record("ls", "current", 2.0, std::nullopt, 0, 5)}).find("\"r2\": null") != std::string::npos);
    }
    SUBCASE("CSV and JSON round trips are exact")
    {
        std::vector<RunRecord> const recs{r, s};
        auto const fromCsv = records_from_csv(records_to_csv(recs));
        CHECK(fromCsv == recs);
        auto const fromJson = records_from_json(records_to_json(fromCsv));
        CHECK(fromJson == recs);
        CHECK(fromJson[1].train_time_s == 0.1 + 0.2);
    }
    SUBCASE("files")
    {
        auto const dir = scratch("export");
        fs::create_directories(dir);
        export_records({r, s}, StoreFormat::Csv, dir / "a.csv");
        export_records({r, s}, StoreFormat::Json, dir / "a.json");
        CHECK(load_records(dir / "a.csv") == load_records(dir / "a.json"));
        CHECK_THROWS_AS(export_records({}, StoreFormat::Csv, dir / "b.csv"), std::invalid_argument);
        CHECK_THROWS(export_records({r}, StoreFormat::Csv, dir / "missing" / "c.csv"));
        fs::remove_all(dir);
    }
    SUBCASE("malformed input")
    {
        CHECK_THROWS_AS(records_from_csv("a,b\n"), std::invalid_argument);
        CHECK_THROWS_AS(records_from_csv(std::string(record_csv_header()) + "\nx,y\n"), std::invalid_argument);
        CHECK_THROWS_AS(records_from_json("{}"), std::invalid_argument);
    }
}

TEST_CASE("reports")
{
    auto const dir = scratch("reports");
    auto read_rows = [&](std::string const& name) {
        std::vector<std::string> lines;
        std::istringstream in(slurp(dir / name));
        for (std::string l; std::getline(in, l);) lines.push_back(l);
        return lines;
    };

    SUBCASE("NoOpt-only store gives an all-zero MSE heatmap row")
    {
        std::vector<RunRecord> recs;
        for (int i = 0; i < 5; ++i) recs.push_back(record("noopt", "current", 10.0 + i, 0.5, i, 7 + i));
        build_reports(recs, {}, dir);
        auto const rows = read_rows("heatmap_mse.csv");
        REQUIRE(rows.size() == 2);
        CHECK(rows[1] == "F1,standard,NoOpt,noopt,current,5,0,0,0,0,0,0,0,0,0,0,0");
    }
    SUBCASE("single record averages to itself")
    {
        auto const r = record("cg", "random", 0.125, 0.75, 4, 9);
        build_reports({r}, {}, dir);
        auto const rows = read_rows("averages.csv");
        REQUIRE(rows.size() == 2);
        CHECK(rows[1] == "CG Random,cg,random,1,0.125,0.75,0,4,0.25,9");
    }
    SUBCASE("size equal to TED correlates perfectly")
    {
        std::vector<RunRecord> recs;
        for (int i = 0; i < 6; ++i) recs.push_back(record("bfgs", "current", 1.0 / (1 + i * i), 0.9, 3 + i, 3 + i));
        build_reports(recs, {}, dir);
        auto const rows = read_rows("correlations.csv");
        REQUIRE(rows.size() == 2);
        std::vector<std::string> f;
        std::stringstream ss(rows[1]);
        for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
        CHECK(std::stod(f[4]) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::stod(f[5]) < 0.05);
    }
    SUBCASE("outliers are flagged, not dropped")
    {
        std::vector<RunRecord> recs;
        for (int i = 0; i < 8; ++i) recs.push_back(record("ls", "current", 1.0, 0.9, 2, 10 + (i % 2)));
        recs.push_back(record("ls", "current", 1e6, 0.1, 40, 49));
        build_reports(recs, {}, dir);
        auto const rows = read_rows("distributions.csv");
        CHECK(rows.size() == 10);
        CHECK(rows.back().substr(rows.back().size() - 6) == ",1,1,1");
    }
    SUBCASE("pure function of the records")
    {
        std::vector<RunRecord> recs;
        for (int i = 0; i < 12; ++i) {
            recs.push_back(record(i % 2 ? "pso" : "noopt", "current", i % 3 ? 1e-9 * i : 4.0 + i, 0.999, i % 5, 5 + i));
            recs.back().variant = i % 4 ? "standard" : "specific";
        }
        auto const other = scratch("reports_again");
        auto const a = build_reports(recs, {}, dir);
        auto const b = build_reports(recs, {}, other);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].filename() == b[i].filename());
            CHECK(slurp(a[i]) == slurp(b[i]));
        }
        fs::remove_all(other);
    }
    SUBCASE("empty input is rejected")
    {
        CHECK_THROWS_AS(build_reports({}, {}, dir), std::invalid_argument);
    }
    fs::remove_all(dir);
}

TEST_CASE("shipped sample store regenerates the golden reports")
{
    fs::path const sample = fs::path(SRLAB_TEST_DATA) / "sample";
    auto const dir = scratch("golden");
    auto const files = build_reports(load_records(sample / "records.csv"), {}, dir);
    std::size_t golden = 0;
    for (auto const& e : fs::directory_iterator(sample / "reports")) {
        (void)e;
        ++golden;
    }
    CHECK(files.size() == golden);
    for (auto const& f : files) {
        INFO(f.filename().string());
        CHECK(slurp(f) == slurp(sample / "reports" / f.filename()));
    }
    fs::remove_all(dir);
}
