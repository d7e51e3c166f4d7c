#ifndef SRLAB_PROBLEMS_HPP
#define SRLAB_PROBLEMS_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "srlab/expr.hpp"

namespace srlab {

enum class Variant { Standard, Specific };

std::string_view variant_name(Variant v) noexcept; // "standard" | "specific"
std::optional<Variant> variant_from_name(std::string_view name) noexcept;

struct ProblemSpec {
    std::string name;
    Expr target;
    double lo = 0.0;
    double hi = 1.0;
    std::size_t n_points = 1000;
    std::vector<Op> specific_ops; // on top of the arithmetic four
};

struct Dataset {
    Eigen::ArrayXd xs;
    Eigen::ArrayXd ys;
};

// The ten built-in univariate problems, in table order.
std::vector<ProblemSpec> const& builtin_problems();
// Case-insensitive lookup among the built-ins.
std::optional<ProblemSpec> find_problem(std::string_view name);

// Validates the interval and that the target is viable on its grid.
// Throws std::invalid_argument otherwise.
ProblemSpec make_problem(std::string name, Expr target, double lo, double hi, std::size_t n_points,
                         std::vector<Op> specific_ops);

// lo + i*(hi-lo)/(n-1) for i in [0, n); endpoints exact.
Eigen::ArrayXd uniform_grid(double lo, double hi, std::size_t n);
Dataset sample_dataset(ProblemSpec const& p);

BasisSet basis_for(ProblemSpec const& p, Variant variant);

} // namespace srlab

#endif
