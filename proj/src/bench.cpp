#include "srlab/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "srlab/metrics.hpp"
#include "srlab/ted.hpp"

namespace srlab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string method_spelling(MethodRow const& m)
{
    std::string s(kind_name(m.kind));
    if (m.init == InitStrategy::RandomNormal) s += ":random";
    return s;
}

MethodRow parse_method(std::string_view text)
{
    auto const colon = text.find(':');
    auto const kind = kind_from_name(text.substr(0, colon));
    if (!kind) throw std::invalid_argument("unknown method '" + std::string(text) + "'");
    MethodRow m{*kind, InitStrategy::Current};
    if (colon != std::string_view::npos) {
        auto const init = init_from_name(text.substr(colon + 1));
        if (!init) throw std::invalid_argument("unknown init strategy in '" + std::string(text) + "'");
        m.init = *init;
    }
    return m;
}

std::vector<MethodRow> default_methods()
{
    using K = OptimizerKind;
    constexpr auto C = InitStrategy::Current;
    constexpr auto R = InitStrategy::RandomNormal;
    return {{K::BFGS, C}, {K::BFGS, R}, {K::CG, C},         {K::CG, R}, {K::LS, C}, {K::LS, R},
            {K::PSO, C},  {K::NelderMead, C}, {K::NelderMead, R}, {K::NoOpt, C}, {K::DE, C}, {K::DualAnnealing, C}};
}

BenchConfig::BenchConfig() : output_dir(default_output_dir())
{
    problems.clear();
    for (auto const& p : builtin_problems()) problems.push_back(p.name);
    set_seed_count(30);
    parallelism = std::max(1u, std::thread::hardware_concurrency());
}

void BenchConfig::set_seed_count(std::size_t n)
{
    replicates.resize(n);
    for (std::size_t i = 0; i < n; ++i) replicates[i] = i;
}

std::optional<ProblemSpec> BenchConfig::problem(std::string_view name) const
{
    for (auto const& p : custom_problems)
        if (p.name == name) return p;
    return find_problem(name);
}

void BenchConfig::validate() const
{
    if (problems.empty()) throw std::invalid_argument("config: no problems");
    if (variants.empty()) throw std::invalid_argument("config: no variants");
    if (methods.empty()) throw std::invalid_argument("config: no methods");
    if (replicates.empty()) throw std::invalid_argument("config: no seeds");
    for (auto const& name : problems)
        if (!problem(name)) throw std::invalid_argument("config: unknown problem '" + name + "'");
    if (parallelism == 0) throw std::invalid_argument("config: parallelism must be positive");
    if (opt.tolerance <= 0.0) throw std::invalid_argument("config: tolerance must be positive");
    if (canon.precision < 1) throw std::invalid_argument("config: precision must be >= 1");
    if (ted_max < 0) throw std::invalid_argument("config: ted_max must be >= 0");
    gp.validate();
}

fs::path default_output_dir()
{
    if (char const* env = std::getenv("SRLAB_OUT_DIR"); env && *env) return env;
    return "results";
}

namespace {

template <class T>
T get_as(json const& v, std::string const& key)
{
    try {
        return v.get<T>();
    }
    catch (json::exception const&) {
        throw std::invalid_argument("config: bad value for '" + key + "'");
    }
}

std::size_t get_size(json const& v, std::string const& key)
{
    if (!v.is_number_unsigned()) throw std::invalid_argument("config: '" + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
}

ProblemSpec parse_custom_problem(json const& j)
{
    if (!j.is_object()) throw std::invalid_argument("config: custom_problems entries must be objects");
    for (auto const& [key, _] : j.items())
        if (key != "name" && key != "target" && key != "lo" && key != "hi" && key != "n_points" && key != "specific_ops")
            throw std::invalid_argument("config: unknown custom problem key '" + key + "'");
    if (!j.contains("name") || !j.contains("target") || !j.contains("lo") || !j.contains("hi"))
        throw std::invalid_argument("config: custom problem needs name, target, lo and hi");
    std::vector<Op> ops;
    if (j.contains("specific_ops"))
        for (auto const& o : j.at("specific_ops")) {
            auto const op = op_from_name(get_as<std::string>(o, "specific_ops"));
            if (!op) throw std::invalid_argument("config: unknown operator '" + o.dump() + "'");
            ops.push_back(*op);
        }
    std::size_t const n = j.contains("n_points") ? get_size(j.at("n_points"), "n_points") : 1000;
    return make_problem(get_as<std::string>(j.at("name"), "name"), parse_prefix(get_as<std::string>(j.at("target"), "target")),
                        get_as<double>(j.at("lo"), "lo"), get_as<double>(j.at("hi"), "hi"), n, std::move(ops));
}

} // namespace

BenchConfig parse_config(std::string_view json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    }
    catch (json::parse_error const& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

    BenchConfig cfg;
    for (auto const& [key, v] : j.items()) {
        if (key == "problems") cfg.problems = get_as<std::vector<std::string>>(v, key);
        else if (key == "custom_problems") {
            for (auto const& p : v) cfg.custom_problems.push_back(parse_custom_problem(p));
        }
        else if (key == "variants") {
            cfg.variants.clear();
            for (auto const& name : get_as<std::vector<std::string>>(v, key)) {
                auto const var = variant_from_name(name);
                if (!var) throw std::invalid_argument("config: unknown variant '" + name + "'");
                cfg.variants.push_back(*var);
            }
        }
        else if (key == "methods") {
            cfg.methods.clear();
            for (auto const& m : get_as<std::vector<std::string>>(v, key)) cfg.methods.push_back(parse_method(m));
        }
        else if (key == "seeds") {
            if (v.is_array()) cfg.replicates = get_as<std::vector<std::uint64_t>>(v, key);
            else cfg.set_seed_count(get_size(v, key));
        }
        else if (key == "master_seed") cfg.gp.seed = get_as<std::uint64_t>(v, key);
        else if (key == "population_size") cfg.gp.population_size = get_size(v, key);
        else if (key == "generations") cfg.gp.generations = get_size(v, key);
        else if (key == "tournament_size") cfg.gp.tournament_size = get_size(v, key);
        else if (key == "crossover_prob") cfg.gp.crossover_prob = get_as<double>(v, key);
        else if (key == "mutation_prob") cfg.gp.mutation_prob = get_as<double>(v, key);
        else if (key == "max_depth") cfg.gp.max_depth = get_size(v, key);
        else if (key == "max_size") cfg.gp.max_size = get_size(v, key);
        else if (key == "elitism") cfg.gp.elitism = get_size(v, key);
        else if (key == "init_depth") cfg.gp.init_depth = get_size(v, key);
        else if (key == "budget") cfg.opt.budget = get_size(v, key);
        else if (key == "tolerance") cfg.opt.tolerance = get_as<double>(v, key);
        else if (key == "swarm_size") cfg.opt.population = get_size(v, key);
        else if (key == "precision") cfg.canon.precision = get_as<int>(v, key);
        else if (key == "max_rewrite_passes") cfg.canon.max_rewrite_passes = get_as<int>(v, key);
        else if (key == "output_dir") cfg.output_dir = get_as<std::string>(v, key);
        else if (key == "parallelism") cfg.parallelism = get_size(v, key);
        else if (key == "ted_max") cfg.ted_max = get_as<long>(v, key);
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

BenchConfig load_config(fs::path const& path)
{
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string Cell::run_id() const
{
    return problem + "/" + std::string(variant_name(variant)) + "/" + std::string(kind_name(method.kind)) + "/" +
           std::string(init_name(method.init)) + "/" + std::to_string(replicate);
}

std::vector<Cell> expand_matrix(BenchConfig const& cfg)
{
    std::vector<Cell> cells;
    for (auto const& p : cfg.problems)
        for (auto v : cfg.variants)
            for (auto const& m : cfg.methods)
                for (auto r : cfg.replicates) cells.push_back({p, v, m, r});
    return cells;
}

std::uint64_t cell_seed(Cell const& cell, std::uint64_t master_seed)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff; // field separator
        h *= 0x100000001b3ULL;
    };
    feed(cell.problem);
    feed(variant_name(cell.variant));
    feed(kind_name(cell.method.kind));
    feed(init_name(cell.method.init));
    feed(std::to_string(cell.replicate));
    feed(std::to_string(master_seed));
    return Rng::mix(h);
}

RunRecord run_cell(Cell const& cell, BenchConfig const& cfg)
{
    auto const problem = cfg.problem(cell.problem);
    if (!problem) throw std::invalid_argument("unknown problem '" + cell.problem + "'");
    OptimizerSpec opt = cfg.opt;
    opt.kind = cell.method.kind;
    opt.init = cell.method.init;

    RunRecord rec;
    rec.run_id = cell.run_id();
    rec.problem = cell.problem;
    rec.variant = std::string(variant_name(cell.variant));
    rec.method = std::string(kind_name(cell.method.kind));
    rec.init = std::string(init_name(cell.method.init));
    rec.seed = cell_seed(cell, cfg.gp.seed);

    Dataset const data = sample_dataset(*problem);
    Rng rng(rec.seed);
    auto const result = evolve(data, basis_for(*problem, cell.variant), cfg.gp, opt, rng);
    rec.train_time_s = result.wall_time;

    Expr const best = substitute_params(result.best.tree, result.best.params);
    rec.size = static_cast<long>(size(best));
    rec.expr_raw = to_prefix(best);
    if (auto const yhat = evaluate(best, ParamVector(0), data.xs)) {
        rec.mse = mse(data.ys, *yhat);
        rec.r2 = r2(data.ys, *yhat);
    }
    else {
        rec.mse = std::numeric_limits<double>::infinity();
    }
    auto const canon = canonicalize(best, cfg.canon);
    rec.expr_canonical = to_prefix(substitute_params(canon.tree, canon.values));
    rec.ted = ted_canonical(best, problem->target, cfg.canon);
    return rec;
}

namespace {

void write_file(fs::path const& path, std::string const& text)
{
    fs::path const tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

// Drops a torn final line left by an interrupted run.
std::string read_store_text(fs::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    auto const last = text.rfind('\n');
    text.resize(last == std::string::npos ? 0 : last + 1);
    return text;
}

} // namespace

BenchOutcome run_benchmark(BenchConfig const& cfg)
{
    cfg.validate();
    fs::create_directories(cfg.output_dir);
    fs::path const store = cfg.output_dir / "records.csv";

    std::map<std::string, RunRecord> done;
    if (fs::exists(store))
        for (auto& r : records_from_csv(read_store_text(store))) done.emplace(r.run_id, std::move(r));

    auto const cells = expand_matrix(cfg);
    std::vector<Cell> todo;
    BenchOutcome outcome;
    for (auto const& c : cells) {
        if (done.count(c.run_id())) ++outcome.skipped;
        else todo.push_back(c);
    }

    // Rewrite the recovered part so appends start on a clean line.
    {
        std::vector<RunRecord> kept;
        for (auto const& [_, r] : done) kept.push_back(r);
        write_file(store, records_to_csv(kept));
    }

    std::mutex mu;
    std::ofstream append(store, std::ios::binary | std::ios::app);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < todo.size(); i = next++) {
            try {
                RunRecord rec = run_cell(todo[i], cfg);
                std::lock_guard lock(mu);
                append << record_csv_line(rec) << std::flush;
                done.emplace(rec.run_id, std::move(rec));
                ++outcome.executed;
            }
            catch (std::exception const& e) {
                std::lock_guard lock(mu);
                outcome.errors.emplace_back(todo[i].run_id(), e.what());
            }
        }
    };
    std::size_t const threads = std::min(cfg.parallelism, std::max<std::size_t>(todo.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    append.close();

    // Matrix order first, then any foreign records by run_id.
    std::set<std::string> placed;
    for (auto const& c : cells) {
        auto it = done.find(c.run_id());
        if (it == done.end()) continue;
        outcome.records.push_back(it->second);
        placed.insert(it->first);
    }
    std::vector<RunRecord> all = outcome.records;
    for (auto const& [id, r] : done)
        if (!placed.count(id)) all.push_back(r);
    write_file(store, records_to_csv(all));

    fs::path const errors = cfg.output_dir / "errors.csv";
    if (outcome.errors.empty()) fs::remove(errors);
    else {
        std::sort(outcome.errors.begin(), outcome.errors.end());
        std::string text = "run_id,message\n";
        for (auto const& [id, msg] : outcome.errors) text += csv_quote(id) + "," + csv_quote(msg) + "\n";
        write_file(errors, text);
    }
    return outcome;
}

} // namespace srlab
