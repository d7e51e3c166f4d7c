#include <doctest.h>

#include "srlab/canon.hpp"
#include "srlab/ted.hpp"

using namespace srlab;

namespace {

double d(char const* a, char const* b) { return ted(parse_labeled(a), parse_labeled(b)); }

} // namespace

TEST_CASE("basic distances")
{
    CHECK(d("(add x 1)", "(add x 1)") == 0.0);
    CHECK(d("a", "b") == 1.0);
    CHECK(d("a", "(a b)") == 1.0);
    CHECK(d("(a b c)", "(a c)") == 1.0);
    CHECK(d("(f (g x))", "(f x)") == 1.0);
    CHECK(d("(a b c)", "(a c b)") == 2.0);
}

TEST_CASE("abs-cos pair needs three edits")
{
    // T1 = abs(x) + c, T2 = x + cos(x): remove abs, relabel c -> cos, insert x.
    auto const t1 = as_labeled(parse_prefix("(add (abs x) c0)"));
    auto const t2 = as_labeled(parse_prefix("(add x (cos x))"));
    CHECK(ted(t1, t2) == 3.0);
}

TEST_CASE("labels")
{
    auto const t = as_labeled(parse_prefix("(mul 2.5 (sin c0))"));
    CHECK(t.label == "mul");
    CHECK(t.children[0].label == "c");
    CHECK(t.children[1].children[0].label == "c");
    CHECK(as_labeled(Expr::var()).label == "x");
    CHECK(tree_size(t) == 4);
    CHECK_THROWS_AS(parse_labeled("(a b"), std::invalid_argument);
    CHECK_THROWS_AS(parse_labeled("a b"), std::invalid_argument);
}

TEST_CASE("weighted costs")
{
    EditCost cost;
    cost.insert = 2.0;
    cost.remove = 3.0;
    cost.relabel = [](std::string const& a, std::string const& b) { return a == b ? 0.0 : 10.0; };
    CHECK(ted(parse_labeled("a"), parse_labeled("(a b)"), cost) == 2.0);
    CHECK(ted(parse_labeled("(a b)"), parse_labeled("a"), cost) == 3.0);
    // Removing and inserting (3 + 2) beats relabelling at 10.
    CHECK(ted(parse_labeled("a"), parse_labeled("b"), cost) == 5.0);
    cost.relabel = [](std::string const& a, std::string const& b) { return a == b ? 0.0 : 4.0; };
    CHECK(ted(parse_labeled("(a x)"), parse_labeled("(b x)"), cost) == 4.0);
}

TEST_CASE("ted_canonical")
{
    CanonConfig const cfg;
    auto const f5 = parse_prefix("(add 3 (mul 2.13 (ln x)))");
    CHECK(ted_canonical(f5, f5, cfg) == 0);
    CHECK(ted_canonical(parse_prefix("(add 7 (mul 9 (ln x)))"), f5, cfg) == 0);
    CHECK(ted_canonical(parse_prefix("(mul 2 x)"), parse_prefix("(add 3 (mul 2 x))"), cfg) == 2);
}

#include "ted_oracle.hpp"

TEST_CASE("matches brute-force edit scripts on all trees up to four nodes")
{
    std::vector<std::string> const labels{"a", "b", "c"};
    ted_oracle::EditGraph const graph(ted_oracle::all_trees(4, labels), labels);
    auto const& ts = graph.trees();
    std::vector<srlab::PostorderTree> post;
    for (auto const& t : ts) post.emplace_back(t);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        auto const dist = graph.distances_from(i);
        for (std::size_t j = 0; j < ts.size(); ++j)
            if (ted(post[i], post[j]) != dist[j]) ++mismatches;
    }
    CHECK(ts.size() == 3 + 9 + 2 * 27 + 5 * 81);
    CHECK(mismatches == 0);
}

TEST_CASE("metric axioms on random trees")
{
    std::vector<std::string> const labels{"add", "mul", "sin", "x", "c"};
    Rng rng(31);
    for (int i = 0; i < 500; ++i) {
        auto const a = ted_oracle::random_tree(rng, 1 + rng.index(12), labels);
        auto const b = ted_oracle::random_tree(rng, 1 + rng.index(12), labels);
        auto const c = ted_oracle::random_tree(rng, 1 + rng.index(12), labels);
        double const ab = ted(a, b), ba = ted(b, a), ac = ted(a, c), bc = ted(b, c);
        CHECK(ab >= 0.0);
        CHECK((ab == 0.0) == (a == b));
        CHECK(ab == ba);
        CHECK(ac <= ab + bc);
        CHECK(ab <= static_cast<double>(tree_size(a) + tree_size(b)));
        CHECK(ted(a, a) == 0.0);

        // One extra leaf costs exactly one insertion.
        auto grown = a;
        grown.children.insert(grown.children.begin() + static_cast<std::ptrdiff_t>(rng.index(grown.children.size() + 1)),
                              LabeledTree{"x", {}});
        CHECK(ted(a, grown) == 1.0);
    }
}
