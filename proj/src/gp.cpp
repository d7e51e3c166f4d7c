#include "srlab/gp.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <stdexcept>

namespace srlab {

void GpConfig::validate() const
{
    if (population_size == 0) throw std::invalid_argument("gp: population_size must be positive");
    if (tournament_size == 0 || tournament_size > population_size)
        throw std::invalid_argument("gp: tournament_size must be in [1, population_size]");
    if (elitism >= population_size) throw std::invalid_argument("gp: elitism must be below population_size");
    if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0) || !(mutation_prob >= 0.0 && mutation_prob <= 1.0))
        throw std::invalid_argument("gp: probabilities must lie in [0, 1]");
    if (max_depth == 0 || max_size == 0 || init_depth == 0)
        throw std::invalid_argument("gp: depth and size limits must be positive");
    if (init_depth > max_depth) throw std::invalid_argument("gp: init_depth must not exceed max_depth");
}

double fitness_of(Expr const& tree, ParamVector const& params, Dataset const& data)
{
    auto const y = evaluate(tree, params, data.xs);
    if (!y) return std::numeric_limits<double>::infinity();
    double const f = (data.ys - *y).square().mean();
    return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
}

Individual make_individual(Expr const& concrete, Dataset const& data, OptimizerSpec const& opt, Rng& rng,
                           std::size_t* evaluations)
{
    auto split = extract_ercs(concrete);
    CompiledExpr compiled(split.tree, data.xs);
    auto const n = static_cast<std::size_t>(data.xs.size());
    auto const obj = Objective::from_residuals(static_cast<std::size_t>(split.params.size()), n, [&](ParamVector const& p, Eigen::VectorXd& r) {
        if (!compiled.run(p)) return false;
        r = (data.ys - compiled.output()).matrix();
        return r.allFinite();
    });
    auto const res = optimize(opt, obj, split.params, rng);
    if (evaluations) *evaluations += res.evaluations;
    Individual ind;
    ind.tree = std::move(split.tree);
    ind.params = res.params;
    ind.fitness = std::isfinite(res.loss) ? res.loss : std::numeric_limits<double>::infinity();
    return ind;
}

std::size_t tournament_select(std::vector<Individual> const& population, std::size_t k, Rng& rng)
{
    if (population.empty() || k == 0) throw std::invalid_argument("tournament_select: empty population or k = 0");
    std::size_t best = rng.index(population.size());
    for (std::size_t i = 1; i < k; ++i) {
        std::size_t const c = rng.index(population.size());
        if (population[c].fitness < population[best].fitness) best = c;
    }
    return best;
}

namespace {

bool within_caps(Expr const& t, GpConfig const& cfg) { return size(t) <= cfg.max_size && depth(t) <= cfg.max_depth; }

} // namespace

std::pair<Expr, Expr> subtree_crossover(Expr const& a, Expr const& b, GpConfig const& cfg, Rng& rng)
{
    std::size_t const i = rng.index(size(a));
    std::size_t const j = rng.index(size(b));
    Expr childA = a, childB = b;
    std::swap(node_at(childA, i), node_at(childB, j));
    if (!within_caps(childA, cfg)) childA = a;
    if (!within_caps(childB, cfg)) childB = b;
    return {std::move(childA), std::move(childB)};
}

Expr subtree_mutation(Expr const& a, BasisSet const& basis, GpConfig const& cfg, Rng& rng)
{
    std::size_t const i = rng.index(size(a));
    std::size_t const d = depth_at(a, i);
    std::size_t const budget = std::min(cfg.max_depth - d + 1, cfg.init_depth);
    Expr child = a;
    node_at(child, i) = random_tree(basis, budget, rng);
    return within_caps(child, cfg) ? child : a;
}

RunResult evolve(Dataset const& data, BasisSet const& basis, GpConfig const& gp, OptimizerSpec const& opt, Rng& rng)
{
    gp.validate();
    auto const start = std::chrono::steady_clock::now();
    RunResult result;
    auto record = [&](std::vector<Individual> const& pop) {
        GenerationStats s;
        double total = 0.0;
        for (auto const& ind : pop) {
            total += static_cast<double>(size(ind.tree));
            if (ind.fitness < result.best.fitness) result.best = ind;
        }
        s.best_fitness = result.best.fitness;
        s.mean_size = total / static_cast<double>(pop.size());
        result.history.push_back(s);
    };

    std::vector<Individual> population;
    population.reserve(gp.population_size);
    while (population.size() < gp.population_size) {
        Expr t = random_tree(basis, gp.init_depth, rng);
        if (!within_caps(t, gp)) continue;
        population.push_back(make_individual(t, data, opt, rng, &result.evaluations));
    }
    result.best = population.front();
    record(population);

    std::vector<std::size_t> order(gp.population_size);
    for (std::size_t g = 0; g < gp.generations; ++g) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return population[x].fitness < population[y].fitness; });

        std::vector<Individual> next;
        next.reserve(gp.population_size);
        for (std::size_t e = 0; e < gp.elitism; ++e) next.push_back(population[order[e]]);

        // Offspring identical to their parent keep the parent's constants and
        // fitness; only changed trees are re-optimized.
        auto offspring = [&](Expr const& child, Individual const& parent) {
            if (child == substitute_params(parent.tree, parent.params))
                next.push_back(parent);
            else
                next.push_back(make_individual(child, data, opt, rng, &result.evaluations));
        };

        while (next.size() < gp.population_size) {
            Individual const& p1 = population[tournament_select(population, gp.tournament_size, rng)];
            double const r = rng.uniform();
            if (r < gp.crossover_prob) {
                Individual const& p2 = population[tournament_select(population, gp.tournament_size, rng)];
                auto [c1, c2] = subtree_crossover(substitute_params(p1.tree, p1.params),
                                                  substitute_params(p2.tree, p2.params), gp, rng);
                offspring(c1, p1);
                if (next.size() < gp.population_size) offspring(c2, p2);
            }
            else if (r < gp.crossover_prob + gp.mutation_prob) {
                offspring(subtree_mutation(substitute_params(p1.tree, p1.params), basis, gp, rng), p1);
            }
            else {
                next.push_back(p1);
            }
        }
        population = std::move(next);
        record(population);
    }

    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

RunResult evolve(ProblemSpec const& problem, Variant variant, GpConfig const& gp, OptimizerSpec const& opt, Rng& rng)
{
    return evolve(sample_dataset(problem), basis_for(problem, variant), gp, opt, rng);
}

} // namespace srlab
