#ifndef SRLAB_BENCH_HPP
#define SRLAB_BENCH_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "srlab/canon.hpp"
#include "srlab/gp.hpp"
#include "srlab/optimizers.hpp"
#include "srlab/problems.hpp"
#include "srlab/record.hpp"

namespace srlab {

// One row of the method matrix, spelled "bfgs" or "bfgs:random" in configs.
struct MethodRow {
    OptimizerKind kind = OptimizerKind::NoOpt;
    InitStrategy init = InitStrategy::Current;

    friend bool operator==(MethodRow const&, MethodRow const&) = default;
};

std::string method_spelling(MethodRow const& m);
// Throws std::invalid_argument on unknown names.
MethodRow parse_method(std::string_view text);
// The twelve averages-table rows, in table order. Population methods run from
// the current constants only.
std::vector<MethodRow> default_methods();

struct BenchConfig {
    std::vector<std::string> problems; // every built-in by default
    std::vector<ProblemSpec> custom_problems;
    std::vector<Variant> variants{Variant::Standard};
    std::vector<MethodRow> methods = default_methods();
    std::vector<std::uint64_t> replicates; // replicate indices; see set_seed_count
    GpConfig gp;                            // gp.seed is the master seed
    OptimizerSpec opt;                      // budget/tolerance/population; kind and init come from methods
    CanonConfig canon;
    std::filesystem::path output_dir;
    std::size_t parallelism = 1; // hardware threads by default
    long ted_max = 10; // heatmap axis

    BenchConfig();

    void set_seed_count(std::size_t n);
    // Resolves a name against custom problems first, then the built-ins.
    std::optional<ProblemSpec> problem(std::string_view name) const;
    // Throws std::invalid_argument on violated invariants.
    void validate() const;
};

// SRLAB_OUT_DIR if set, otherwise "results".
std::filesystem::path default_output_dir();

// Flat JSON object; every key optional. Unknown keys are rejected so typos do
// not silently fall back to defaults. See README for the key list.
BenchConfig load_config(std::filesystem::path const& path);
BenchConfig parse_config(std::string_view json_text);

struct Cell {
    std::string problem;
    Variant variant = Variant::Standard;
    MethodRow method;
    std::uint64_t replicate = 0;

    std::string run_id() const; // problem/variant/method/init/replicate
};

// Matrix order: problem, variant, method, replicate.
std::vector<Cell> expand_matrix(BenchConfig const& cfg);
// FNV-1a over the cell coordinates and master seed, finished with a mixer.
std::uint64_t cell_seed(Cell const& cell, std::uint64_t master_seed);

// Evolves one cell and scores the best individual.
RunRecord run_cell(Cell const& cell, BenchConfig const& cfg);

struct BenchOutcome {
    std::vector<RunRecord> records; // matrix order
    std::size_t executed = 0;       // cells run in this call
    std::size_t skipped = 0;        // already present in the store
    std::vector<std::pair<std::string, std::string>> errors; // run_id, message
};

// Runs every missing cell of the matrix. Records are appended to
// <output_dir>/records.csv as they finish; at the end the store is rewritten
// in matrix order. Failed cells go to <output_dir>/errors.csv.
BenchOutcome run_benchmark(BenchConfig const& cfg);

enum class StoreFormat { Csv, Json };

void export_records(std::vector<RunRecord> const& records, StoreFormat format, std::filesystem::path const& path);
// CSV pieces shared by the store writer and incremental appends.
std::string_view record_csv_header();
std::string record_csv_line(RunRecord const& r);
// RFC-4180 quoting when needed.
std::string csv_quote(std::string const& s);
std::string records_to_csv(std::vector<RunRecord> const& records);
std::string records_to_json(std::vector<RunRecord> const& records);
// Throw std::invalid_argument on malformed input.
std::vector<RunRecord> records_from_csv(std::string_view text);
std::vector<RunRecord> records_from_json(std::string_view text);
std::vector<RunRecord> load_records(std::filesystem::path const& path);

struct ReportConfig {
    long ted_max = 10;
    std::vector<ProblemSpec> custom_problems; // for target sizes
};

// Writes the report bundle into `dir` and returns the files written, sorted.
// The output is a pure function of the records.
std::vector<std::filesystem::path> build_reports(std::vector<RunRecord> const& records, ReportConfig const& cfg,
                                                 std::filesystem::path const& dir);

} // namespace srlab

#endif
