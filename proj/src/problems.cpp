#include "srlab/problems.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace srlab {

std::string_view variant_name(Variant v) noexcept { return v == Variant::Standard ? "standard" : "specific"; }

std::optional<Variant> variant_from_name(std::string_view name) noexcept
{
    if (name == "standard") return Variant::Standard;
    if (name == "specific") return Variant::Specific;
    return std::nullopt;
}

Eigen::ArrayXd uniform_grid(double lo, double hi, std::size_t n)
{
    if (n == 0) throw std::invalid_argument("uniform_grid: n must be positive");
    Eigen::ArrayXd xs(static_cast<Eigen::Index>(n));
    if (n == 1) {
        xs[0] = lo;
        return xs;
    }
    double const denom = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) xs[static_cast<Eigen::Index>(i)] = lo + static_cast<double>(i) * (hi - lo) / denom;
    xs[static_cast<Eigen::Index>(n - 1)] = hi;
    return xs;
}

ProblemSpec make_problem(std::string name, Expr target, double lo, double hi, std::size_t n_points,
                         std::vector<Op> specific_ops)
{
    if (!(lo < hi)) throw std::invalid_argument("problem " + name + ": interval must satisfy lo < hi");
    if (n_points < 2) throw std::invalid_argument("problem " + name + ": need at least 2 points");
    if (erc_count(target) != 0) throw std::invalid_argument("problem " + name + ": target must not contain erc leaves");
    for (Op op : specific_ops)
        if (arity(op) == 0) throw std::invalid_argument("problem " + name + ": specific ops must be operators");
    ProblemSpec p{std::move(name), std::move(target), lo, hi, n_points, std::move(specific_ops)};
    if (!evaluate(p.target, ParamVector(0), uniform_grid(lo, hi, n_points)))
        throw std::invalid_argument("problem " + p.name + ": target is nonviable on its grid");
    return p;
}

std::vector<ProblemSpec> const& builtin_problems()
{
    static std::vector<ProblemSpec> const problems = [] {
        auto mk = [](char const* name, char const* target, double lo, double hi, std::vector<Op> ops) {
            return make_problem(name, parse_prefix(target), lo, hi, 1000, std::move(ops));
        };
        std::vector<ProblemSpec> v;
        v.push_back(mk("F1", "(add 1.57 (mul 24.3 x))", -5, 5, {Op::Square}));
        v.push_back(mk("F4", "(add -2.3 (mul 0.13 (sin x)))", -5, 5, {Op::Sin, Op::Cos}));
        v.push_back(mk("F5", "(add 3 (mul 2.13 (ln x)))", 0.1, 10, {Op::Ln}));
        v.push_back(mk("F6", "(add 1.3 (mul 0.13 (sqrt x)))", 0.1, 10, {Op::Sqrt}));
        v.push_back(mk("F7", "(mul 213.81 (sub 1 (expneg (mul 0.547237 x))))", 0.1, 10, {Op::Exp, Op::ExpNeg}));
        v.push_back(mk("F11", "(add 6.87 (mul 11 (cos (mul 7.23 (cube x)))))", -5, 5, {Op::Cos, Op::Sin, Op::Cube}));
        // The printed row has no variable; this is the logistic-type reading.
        v.push_back(mk("logistic", "(mul 10 (exp (mul -0.5 (exp (add (mul -0.5 x) 2)))))", -5, 15,
                       {Op::Exp, Op::ExpNeg}));
        v.push_back(mk("projectile", "(sub (mul 6 x) (mul 9.8 (square x)))", -5, 5, {Op::Square}));
        v.push_back(mk("damped_pendulum", "(mul (expneg (div x 10)) (mul 3 (cos (mul 2 x))))", -5, 5,
                       {Op::Exp, Op::ExpNeg, Op::Cos, Op::Sin}));
        v.push_back(mk("radioactive_decay", "(mul 10 (expneg (mul 0.5 x)))", -5, 5, {Op::Exp, Op::ExpNeg}));
        return v;
    }();
    return problems;
}

std::optional<ProblemSpec> find_problem(std::string_view name)
{
    auto lower = [](std::string_view s) {
        std::string out(s);
        std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
        return out;
    };
    auto const key = lower(name);
    for (auto const& p : builtin_problems())
        if (lower(p.name) == key) return p;
    return std::nullopt;
}

Dataset sample_dataset(ProblemSpec const& p)
{
    Dataset d;
    d.xs = uniform_grid(p.lo, p.hi, p.n_points);
    auto ys = evaluate(p.target, ParamVector(0), d.xs);
    if (!ys) throw std::invalid_argument("problem " + p.name + ": target is nonviable on its grid");
    d.ys = std::move(*ys);
    return d;
}

BasisSet basis_for(ProblemSpec const& p, Variant variant)
{
    if (variant == Variant::Standard) return BasisSet::standard();
    return BasisSet(p.specific_ops);
}

} // namespace srlab
