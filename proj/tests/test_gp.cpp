#include <doctest.h>

#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include "srlab/gp.hpp"

using namespace srlab;

namespace {

std::vector<Individual> population_with(std::vector<double> const& fitness)
{
    std::vector<Individual> pop;
    for (double f : fitness) {
        Individual ind;
        ind.tree = Expr::var();
        ind.params = ParamVector(0);
        ind.fitness = f;
        pop.push_back(ind);
    }
    return pop;
}

// Winner distribution of a k-draw tournament by walking every draw sequence.
std::vector<double> enumerate_tournament(std::vector<double> const& fitness, std::size_t k)
{
    std::size_t const n = fitness.size();
    std::vector<double> p(n, 0.0);
    std::vector<std::size_t> draw(k, 0);
    double const weight = 1.0 / std::pow(static_cast<double>(n), static_cast<double>(k));
    std::function<void(std::size_t)> rec = [&](std::size_t depth) {
        if (depth == k) {
            std::size_t best = draw[0];
            for (std::size_t i = 1; i < k; ++i)
                if (fitness[draw[i]] < fitness[best]) best = draw[i];
            p[best] += weight;
            return;
        }
        for (std::size_t i = 0; i < n; ++i) {
            draw[depth] = i;
            rec(depth + 1);
        }
    };
    rec(0);
    return p;
}

void collect_ops(Expr const& e, std::set<Op>& ops)
{
    if (!is_leaf(e.op())) ops.insert(e.op());
    for (auto const& c : e.children()) collect_ops(c, ops);
}

Dataset constant_data(double value)
{
    Dataset d;
    d.xs = Eigen::ArrayXd::LinSpaced(50, -2.0, 2.0);
    d.ys = Eigen::ArrayXd::Constant(50, value);
    return d;
}

GpConfig small_config()
{
    GpConfig gp;
    gp.population_size = 30;
    gp.generations = 10;
    return gp;
}

} // namespace

TEST_CASE("config validation")
{
    GpConfig gp;
    CHECK_NOTHROW(gp.validate());
    gp.tournament_size = gp.population_size + 1;
    CHECK_THROWS_AS(gp.validate(), std::invalid_argument);
    gp = GpConfig{};
    gp.elitism = gp.population_size;
    CHECK_THROWS_AS(gp.validate(), std::invalid_argument);
    gp = GpConfig{};
    gp.crossover_prob = 1.5;
    CHECK_THROWS_AS(gp.validate(), std::invalid_argument);
}

TEST_CASE("tournament selection matches enumerated distribution")
{
    for (std::size_t n = 1; n <= 4; ++n) {
        for (std::size_t k = 1; k <= n; ++k) {
            std::vector<double> fitness;
            for (std::size_t i = 0; i < n; ++i) fitness.push_back(static_cast<double>((i * 7 + 3) % n));
            auto const expected = enumerate_tournament(fitness, k);
            auto const pop = population_with(fitness);
            Rng rng(100 * n + k);
            std::size_t const trials = 200000;
            std::vector<double> counts(n, 0.0);
            for (std::size_t t = 0; t < trials; ++t) counts[tournament_select(pop, k, rng)] += 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                double const p = expected[i];
                double const sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
                INFO("n=", n, " k=", k, " member ", i);
                CHECK(std::abs(counts[i] / static_cast<double>(trials) - p) <= 5.0 * sigma + 1e-12);
            }
        }
    }
}

TEST_CASE("tournament edge cases")
{
    Rng rng(3);
    SUBCASE("k = n favours the global best")
    {
        auto const pop = population_with({4.0, 1.0, 3.0, 2.0});
        int best = 0;
        for (int t = 0; t < 20000; ++t) best += tournament_select(pop, 4, rng) == 1;
        double const bound = 1.0 - std::pow(0.75, 4.0);
        CHECK(best / 20000.0 >= bound - 0.02);
    }
    SUBCASE("equal fitness is uniform and never throws")
    {
        auto const pop = population_with({1.0, 1.0, 1.0});
        std::vector<int> counts(3, 0);
        for (int t = 0; t < 30000; ++t) ++counts[tournament_select(pop, 3, rng)];
        for (int c : counts) CHECK(std::abs(c / 30000.0 - 1.0 / 3.0) < 0.02);
    }
    SUBCASE("infinite fitness loses")
    {
        double const inf = std::numeric_limits<double>::infinity();
        auto const pop = population_with({inf, 2.0});
        for (int t = 0; t < 100; ++t) CHECK(tournament_select(pop, 2, rng) <= 1);
        auto const only = population_with({inf});
        CHECK(tournament_select(only, 1, rng) == 0);
    }
    SUBCASE("empty population throws")
    {
        CHECK_THROWS_AS(tournament_select({}, 1, rng), std::invalid_argument);
    }
}

TEST_CASE("subtree crossover")
{
    GpConfig const gp;
    SUBCASE("two leaves swap")
    {
        Rng rng(1);
        auto [a, b] = subtree_crossover(Expr::var(), Expr::constant(2.5), gp, rng);
        CHECK(to_prefix(a) == "2.5");
        CHECK(to_prefix(b) == "x");
    }
    SUBCASE("offspring respect caps and conserve nodes when both are kept")
    {
        Rng rng(2);
        GpConfig tight;
        tight.max_depth = 5;
        tight.max_size = 15;
        tight.init_depth = 5;
        auto const basis = BasisSet::standard();
        for (int t = 0; t < 2000; ++t) {
            Expr a = random_tree(basis, 5, rng), b = random_tree(basis, 5, rng);
            if (size(a) > tight.max_size || size(b) > tight.max_size) continue;
            auto [c, d] = subtree_crossover(a, b, tight, rng);
            CHECK(size(c) <= tight.max_size);
            CHECK(depth(c) <= tight.max_depth);
            CHECK(size(d) <= tight.max_size);
            CHECK(depth(d) <= tight.max_depth);
            if (!(c == a) && !(d == b)) CHECK(size(c) + size(d) == size(a) + size(b));
        }
    }
    SUBCASE("deterministic under a fixed seed")
    {
        auto const a = parse_prefix("(add (mul 2 x) (sin x))");
        auto const b = parse_prefix("(sub (exp x) 1)");
        Rng r1(9), r2(9);
        auto const p = subtree_crossover(a, b, gp, r1);
        auto const q = subtree_crossover(a, b, gp, r2);
        CHECK(p.first == q.first);
        CHECK(p.second == q.second);
    }
}

TEST_CASE("subtree mutation")
{
    GpConfig gp;
    gp.max_size = 20;
    SUBCASE("operators come from the basis or the parent")
    {
        Rng rng(4);
        BasisSet const basis({Op::Sin});
        auto const parent = parse_prefix("(add (tanh x) (mul 2 (ln x)))");
        std::set<Op> allowed(basis.operators().begin(), basis.operators().end());
        collect_ops(parent, allowed);
        for (int t = 0; t < 1000; ++t) {
            auto const child = subtree_mutation(parent, basis, gp, rng);
            std::set<Op> ops;
            collect_ops(child, ops);
            for (Op op : ops) CHECK(allowed.count(op) == 1);
            CHECK(size(child) <= gp.max_size);
            CHECK(depth(child) <= gp.max_depth);
        }
    }
    SUBCASE("mutating a leaf yields a tree within the depth budget")
    {
        Rng rng(5);
        auto const basis = BasisSet::standard();
        for (int t = 0; t < 300; ++t) {
            auto const child = subtree_mutation(Expr::var(), basis, gp, rng);
            CHECK(depth(child) <= gp.init_depth);
        }
    }
}

TEST_CASE("make_individual")
{
    auto const data = constant_data(5.0);
    Rng rng(6);
    auto const concrete = parse_prefix("(add 1.5 (mul 0 x))");
    SUBCASE("NoOpt keeps the extracted constants")
    {
        std::size_t evals = 0;
        auto const ind = make_individual(concrete, data, {OptimizerKind::NoOpt}, rng, &evals);
        CHECK(evals == 1);
        REQUIRE(ind.params.size() == 2);
        CHECK(ind.params[0] == 1.5);
        CHECK(ind.params[1] == 0.0);
        CHECK(ind.fitness == doctest::Approx(12.25));
    }
    SUBCASE("fitness is the MSE of the bound tree")
    {
        auto const ind = make_individual(concrete, data, {OptimizerKind::LS}, rng);
        CHECK(ind.fitness == fitness_of(ind.tree, ind.params, data));
        CHECK(ind.fitness <= 1e-20);
    }
    SUBCASE("nonviable trees carry infinite fitness")
    {
        auto const ind = make_individual(parse_prefix("(ln (sub 0 (abs x)))"), data, {OptimizerKind::BFGS}, rng);
        CHECK(std::isinf(ind.fitness));
    }
}

TEST_CASE("evolve")
{
    auto const basis = BasisSet::standard();
    SUBCASE("zero generations returns the best initial individual")
    {
        GpConfig gp = small_config();
        gp.generations = 0;
        Rng rng(7);
        auto const r = evolve(constant_data(5.0), basis, gp, {OptimizerKind::BFGS}, rng);
        CHECK(r.history.size() == 1);
        CHECK(r.best.fitness == r.history[0].best_fitness);
        CHECK(r.best.fitness == fitness_of(r.best.tree, r.best.params, constant_data(5.0)));
    }
    SUBCASE("constant target is matched by every optimizer")
    {
        auto const data = constant_data(5.0);
        for (auto kind : {OptimizerKind::BFGS, OptimizerKind::CG, OptimizerKind::LS, OptimizerKind::PSO,
                          OptimizerKind::NelderMead, OptimizerKind::DE, OptimizerKind::DualAnnealing}) {
            for (auto init : {InitStrategy::Current, InitStrategy::RandomNormal}) {
                Rng rng(8);
                auto const r = evolve(data, basis, small_config(), {kind, init}, rng);
                INFO(kind_name(kind), " ", init_name(init));
                CHECK(r.best.fitness <= 1e-12);
            }
        }
    }
    SUBCASE("history is non-increasing and the best is reproducible")
    {
        Dataset data = sample_dataset(*find_problem("F4"));
        GpConfig gp = small_config();
        Rng rng(10);
        auto const r = evolve(data, basis, gp, {OptimizerKind::NelderMead}, rng);
        REQUIRE(r.history.size() == gp.generations + 1);
        for (std::size_t g = 1; g < r.history.size(); ++g) CHECK(r.history[g].best_fitness <= r.history[g - 1].best_fitness);
        CHECK(r.best.fitness == r.history.back().best_fitness);
        CHECK(r.best.fitness == fitness_of(r.best.tree, r.best.params, data));
        CHECK(size(r.best.tree) <= gp.max_size);
        CHECK(depth(r.best.tree) <= gp.max_depth);
    }
    SUBCASE("NoOpt never optimizes")
    {
        Dataset data = sample_dataset(*find_problem("F1"));
        GpConfig gp = small_config();
        Rng rng(11);
        auto const r = evolve(data, basis, gp, {OptimizerKind::NoOpt}, rng);
        // One evaluation per created individual, at most population * (generations + 1).
        CHECK(r.evaluations <= gp.population_size * (gp.generations + 1));
        CHECK(r.evaluations >= gp.population_size);
        CHECK(r.best.fitness > 1e-6);
    }
    SUBCASE("same seed, same result")
    {
        Dataset data = sample_dataset(*find_problem("F5"));
        GpConfig gp = small_config();
        for (auto kind : {OptimizerKind::PSO, OptimizerKind::LS}) {
            Rng r1(12), r2(12);
            auto const a = evolve(data, basis, gp, {kind, InitStrategy::RandomNormal}, r1);
            auto const b = evolve(data, basis, gp, {kind, InitStrategy::RandomNormal}, r2);
            CHECK(a.best.tree == b.best.tree);
            CHECK(to_prefix(substitute_params(a.best.tree, a.best.params)) ==
                  to_prefix(substitute_params(b.best.tree, b.best.params)));
            CHECK(a.best.fitness == b.best.fitness);
            CHECK(a.evaluations == b.evaluations);
            REQUIRE(a.history.size() == b.history.size());
            for (std::size_t g = 0; g < a.history.size(); ++g) {
                CHECK(a.history[g].best_fitness == b.history[g].best_fitness);
                CHECK(a.history[g].mean_size == b.history[g].mean_size);
            }
        }
    }
}

TEST_CASE("F1 with BFGS converges in most runs under the default configuration")
{
    auto const problem = *find_problem("F1");
    GpConfig const gp;
    int solved = 0;
    int const runs = 30;
    for (int s = 0; s < runs; ++s) {
        Rng rng(static_cast<std::uint64_t>(5000 + s));
        auto const r = evolve(problem, Variant::Standard, gp, {OptimizerKind::BFGS}, rng);
        solved += r.best.fitness <= 1e-6;
    }
    MESSAGE("F1/BFGS solved ", solved, " of ", runs);
    CHECK(solved >= 24);
}
