#include <doctest.h>

#include <cmath>

#include "srlab/problems.hpp"

using namespace srlab;

namespace {

double at(ProblemSpec const& p, double x) { return evaluate_at(p.target, ParamVector(0), x); }

} // namespace

TEST_CASE("builtin suite")
{
    auto const& ps = builtin_problems();
    CHECK(ps.size() == 10);
    auto const f1 = *find_problem("F1");
    CHECK(at(f1, 1.0) == doctest::Approx(25.87).epsilon(1e-14));
    CHECK(find_problem("F5")->lo == 0.1);
    CHECK(find_problem("Logistic"));
    CHECK_FALSE(find_problem("F2"));

    // Closed forms written out directly.
    auto check = [](char const* name, double x, double expected) {
        INFO(name, " at ", x);
        CHECK(at(*find_problem(name), x) == doctest::Approx(expected).epsilon(1e-13));
    };
    check("F4", 1.3, -2.3 + 0.13 * std::sin(1.3));
    check("F5", 2.0, 3.0 + 2.13 * std::log(2.0));
    check("F6", 4.0, 1.3 + 0.13 * 2.0);
    check("F7", 1.7, 213.81 * (1.0 - std::exp(-0.547237 * 1.7)));
    check("F11", 0.4, 6.87 + 11.0 * std::cos(7.23 * 0.064));
    check("logistic", 3.0, 10.0 * std::exp(-0.5 * std::exp(-0.5 * 3.0 + 2.0)));
    check("projectile", 2.0, 12.0 - 9.8 * 4.0);
    check("damped_pendulum", 1.5, std::exp(-0.15) * 3.0 * std::cos(3.0));
    check("radioactive_decay", 0.0, 10.0);
}

TEST_CASE("sample_dataset")
{
    auto const d = sample_dataset(*find_problem("F1"));
    CHECK(d.xs.size() == 1000);
    CHECK(d.xs[0] == -5.0);
    CHECK(d.xs[999] == 5.0);
    for (Eigen::Index i = 1; i < d.xs.size(); ++i) CHECK(d.xs[i] > d.xs[i - 1]);

    auto p = *find_problem("radioactive_decay");
    p.n_points = 2;
    auto const two = sample_dataset(p);
    CHECK(two.xs.size() == 2);
    CHECK(two.xs[0] == -5.0);
    CHECK(two.xs[1] == 5.0);

    auto const g = uniform_grid(-1.0, 1.0, 3);
    CHECK(g[1] == 0.0);
}

TEST_CASE("every built-in target is viable on its grid and deterministic")
{
    for (auto const& p : builtin_problems()) {
        INFO(p.name);
        auto const a = sample_dataset(p), b = sample_dataset(p);
        CHECK(a.ys.allFinite());
        CHECK((a.ys == b.ys).all());
        CHECK(a.xs.size() == static_cast<Eigen::Index>(p.n_points));
    }
}

TEST_CASE("basis_for")
{
    for (auto const& p : builtin_problems()) {
        auto const standard = basis_for(p, Variant::Standard);
        auto const specific = basis_for(p, Variant::Specific);
        CHECK(standard.operators().size() == 15);
        for (Op op : specific.operators()) CHECK(standard.contains(op));
        for (Op op : {Op::Add, Op::Sub, Op::Mul, Op::Div}) CHECK(specific.contains(op));
    }
    auto const f5 = basis_for(*find_problem("F5"), Variant::Specific);
    CHECK(f5.operators().size() == 5);
    CHECK(f5.contains(Op::Ln));
    auto const f4 = basis_for(*find_problem("F4"), Variant::Specific);
    CHECK(f4.operators().size() == 6);
    CHECK(f4.contains(Op::Sin));
    CHECK(f4.contains(Op::Cos));
}

TEST_CASE("custom problems are validated")
{
    CHECK_THROWS_AS(make_problem("bad", parse_prefix("(ln x)"), -1.0, 1.0, 10, {}), std::invalid_argument);
    CHECK_THROWS_AS(make_problem("bad", parse_prefix("x"), 1.0, 1.0, 10, {}), std::invalid_argument);
    CHECK_THROWS_AS(make_problem("bad", parse_prefix("(add c0 x)"), 0.0, 1.0, 10, {}), std::invalid_argument);
    auto const ok = make_problem("mine", parse_prefix("(mul 2 (sin x))"), 0.0, 1.0, 10, {Op::Sin});
    CHECK(sample_dataset(ok).ys.size() == 10);
    CHECK(variant_from_name("specific") == Variant::Specific);
    CHECK(variant_name(Variant::Standard) == "standard");
}
