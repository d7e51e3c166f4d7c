#ifndef SRLAB_GP_HPP
#define SRLAB_GP_HPP

#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "srlab/expr.hpp"
#include "srlab/optimizers.hpp"
#include "srlab/problems.hpp"
#include "srlab/rng.hpp"

namespace srlab {

struct GpConfig {
    std::size_t population_size = 200;
    std::size_t generations = 100;
    std::size_t tournament_size = 3;
    double crossover_prob = 0.9;
    double mutation_prob = 0.1;
    std::size_t max_depth = 8;
    std::size_t max_size = 50;
    std::size_t elitism = 1;
    // Depth ramp for initial trees and mutation subtrees.
    std::size_t init_depth = 5;
    std::uint64_t seed = 0;

    // Throws std::invalid_argument on inconsistent settings.
    void validate() const;
};

struct Individual {
    Expr tree; // erc leaves
    ParamVector params;
    double fitness = std::numeric_limits<double>::infinity();
};

struct GenerationStats {
    double best_fitness = 0.0;
    double mean_size = 0.0;
};

struct RunResult {
    Individual best;
    std::vector<GenerationStats> history; // generation 0 is the initial population
    double wall_time = 0.0;
    std::size_t evaluations = 0; // objective evaluations spent on constant optimization
};

// MSE of the bound tree on the data, +inf when nonviable.
double fitness_of(Expr const& tree, ParamVector const& params, Dataset const& data);

// Builds an individual from a concrete tree: extracts ERCs, optimizes them and
// scores the result. Adds the evaluations spent to *evaluations if given.
Individual make_individual(Expr const& concrete, Dataset const& data, OptimizerSpec const& opt, Rng& rng,
                           std::size_t* evaluations = nullptr);

// Lowest fitness among k uniform draws with replacement; the earliest draw
// wins ties. Returns an index into the population.
std::size_t tournament_select(std::vector<Individual> const& population, std::size_t k, Rng& rng);

// Swaps uniformly chosen subtrees. An offspring breaking the caps is replaced
// by its own parent.
std::pair<Expr, Expr> subtree_crossover(Expr const& a, Expr const& b, GpConfig const& cfg, Rng& rng);

// Replaces a uniformly chosen subtree with a random tree; reject-and-keep on
// cap violations.
Expr subtree_mutation(Expr const& a, BasisSet const& basis, GpConfig const& cfg, Rng& rng);

RunResult evolve(Dataset const& data, BasisSet const& basis, GpConfig const& gp, OptimizerSpec const& opt, Rng& rng);
RunResult evolve(ProblemSpec const& problem, Variant variant, GpConfig const& gp, OptimizerSpec const& opt, Rng& rng);

} // namespace srlab

#endif
