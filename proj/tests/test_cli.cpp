#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "srlab/bench.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int status = -1;
    std::string out;
};

Result cli(std::string const& args, std::string const& env = "")
{
    std::string const cmd = env + " '" SRLAB_CLI "' " + args + " 2>/dev/null";
    Result r;
    FILE* p = ::popen(cmd.c_str(), "r");
    REQUIRE(p);
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
    int const raw = ::pclose(p);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

fs::path scratch(std::string const& name)
{
    fs::path const p = fs::temp_directory_path() / ("srlab_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("ted")
{
    CHECK(cli("ted '(add x 1)' '(add x 1)'").out == "0\n");
    // Equal after canonicalization, one relabel apart as written.
    CHECK(cli("ted '(add x 1)' '(add 1 x)'").out == "0\n");
    CHECK(cli("ted --raw '(add x 1)' '(add 1 x)'").out == "2\n");
    CHECK(cli("ted '(add x' '(add x 1)'").status == 1);
}

TEST_CASE("canon")
{
    auto const r = cli("canon '(add (mul 2 x) (mul 3 x))'");
    CHECK(r.status == 0);
    CHECK(r.out == "(mul c0 x)\n(mul 5 x)\n");
}

TEST_CASE("run and report")
{
    auto const dir = scratch("run");
    auto const r = cli("run --problems F1 --methods noopt --seeds 2 --parallelism 1 --out '" + dir.string() + "'");
    CHECK(r.status == 0);
    CHECK(srlab::load_records(dir / "records.csv").size() == 2);
    CHECK(cli("report --store '" + (dir / "records.csv").string() + "'").status == 0);
    CHECK(fs::exists(dir / "reports" / "averages.csv"));
    fs::remove_all(dir);
}

TEST_CASE("output directory defaults to SRLAB_OUT_DIR")
{
    auto const dir = scratch("env");
    auto const env = "SRLAB_OUT_DIR='" + dir.string() + "'";
    CHECK(cli("run --problems F4 --methods noopt,ls --seeds 0,5 --parallelism 1", env).status == 0);
    auto const recs = srlab::load_records(dir / "records.csv");
    REQUIRE(recs.size() == 4);
    CHECK(recs.back().run_id == "F4/standard/ls/current/5");
    CHECK(cli("report", env).status == 0);
    CHECK(fs::exists(dir / "reports" / "heatmap_mse.csv"));
    fs::remove_all(dir);
}

TEST_CASE("bad usage")
{
    CHECK(cli("").status != 0);
    CHECK(cli("frobnicate").status != 0);
    CHECK(cli("run --bogus").status != 0);
    CHECK(cli("run --methods sgd --seeds 1").status == 1);
    CHECK(cli("run --variant sideways --seeds 1").status == 1);
    CHECK(cli("report --store /nonexistent/records.csv").status == 1);
}
