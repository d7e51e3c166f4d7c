#ifndef SRLAB_TESTS_CANON_CHECKS_HPP
#define SRLAB_TESTS_CANON_CHECKS_HPP

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "srlab/expr.hpp"

namespace canon_checks {

using namespace srlab;

// "lhs|rhs" lines; '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> corpus(std::string const& path)
{
    std::ifstream in(path);
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto const bar = line.find('|');
        pairs.emplace_back(line.substr(0, bar), line.substr(bar + 1));
    }
    return pairs;
}

inline std::optional<double> viable_at(Expr const& t, ParamVector const& p, double x)
{
    Eigen::ArrayXd xs(1);
    xs[0] = x;
    auto const y = evaluate(t, p, xs);
    if (!y) return std::nullopt;
    return (*y)[0];
}

// Scales x and every constant by (1 + eps).
inline Expr perturbed(Expr const& e, double eps)
{
    if (e.op() == Op::Const) return Expr::constant(e.value() * (1.0 + eps));
    if (e.op() == Op::Var) return Expr::binary(Op::Mul, Expr::constant(1.0 + eps), Expr::var());
    std::vector<Expr> children;
    for (auto const& c : e.children()) children.push_back(perturbed(c, eps));
    return Expr::make(e.op(), std::move(children));
}

// A point is well conditioned when relative input perturbations far below
// double-precision rounding of 15-digit constants leave the value within the
// soundness tolerance. Elsewhere (e.g. sin of 1e20) no rewrite can be checked.
inline bool well_conditioned(Expr const& t, double x, double y)
{
    for (double eps : {1e-13, -1e-13}) {
        double const z = evaluate_at(perturbed(t, eps), ParamVector(0), x);
        if (!(std::abs(z - y) <= 1e-10 * (1.0 + std::abs(y)))) return false;
    }
    return true;
}

} // namespace canon_checks

#endif
