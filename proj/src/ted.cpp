#include "srlab/ted.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "srlab/canon.hpp"

namespace srlab {

namespace {

void postorder(LabeledTree const& t, PostorderTree& out)
{
    int first = -1;
    for (auto const& c : t.children) {
        postorder(c, out);
        if (first < 0) first = out.leftmost.back();
    }
    out.labels.push_back(t.label);
    out.leftmost.push_back(first < 0 ? static_cast<int>(out.labels.size()) - 1 : first);
}

struct Parser {
    std::string_view s;
    std::size_t pos = 0;

    void skip()
    {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    std::string token()
    {
        skip();
        std::size_t const start = pos;
        while (pos < s.size() && s[pos] != '(' && s[pos] != ')' && !std::isspace(static_cast<unsigned char>(s[pos])))
            ++pos;
        if (pos == start) throw std::invalid_argument("parse_labeled: expected a label at offset " + std::to_string(pos));
        return std::string(s.substr(start, pos - start));
    }

    LabeledTree tree()
    {
        skip();
        if (pos < s.size() && s[pos] == '(') {
            ++pos;
            LabeledTree t{token(), {}};
            for (;;) {
                skip();
                if (pos >= s.size()) throw std::invalid_argument("parse_labeled: unbalanced parentheses");
                if (s[pos] == ')') {
                    ++pos;
                    return t;
                }
                t.children.push_back(tree());
            }
        }
        return LabeledTree{token(), {}};
    }
};

} // namespace

LabeledTree as_labeled(Expr const& e)
{
    LabeledTree t;
    switch (e.op()) {
    case Op::Var: t.label = "x"; break;
    case Op::Const:
    case Op::Erc: t.label = "c"; break;
    default: t.label = std::string(op_name(e.op())); break;
    }
    t.children.reserve(e.children().size());
    for (auto const& c : e.children()) t.children.push_back(as_labeled(c));
    return t;
}

LabeledTree parse_labeled(std::string_view text)
{
    Parser p{text};
    auto t = p.tree();
    p.skip();
    if (p.pos != text.size()) throw std::invalid_argument("parse_labeled: trailing input at offset " + std::to_string(p.pos));
    return t;
}

std::size_t tree_size(LabeledTree const& t) noexcept
{
    std::size_t n = 1;
    for (auto const& c : t.children) n += tree_size(c);
    return n;
}

PostorderTree::PostorderTree(LabeledTree const& t)
{
    postorder(t, *this);
    // A keyroot is the highest node for its leftmost leaf.
    int const n = static_cast<int>(labels.size());
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int i = n - 1; i >= 0; --i) {
        auto const l = static_cast<std::size_t>(leftmost[static_cast<std::size_t>(i)]);
        if (!seen[l]) {
            seen[l] = true;
            keyroots.push_back(i);
        }
    }
    std::reverse(keyroots.begin(), keyroots.end());
}

double ted(PostorderTree const& a, PostorderTree const& b, EditCost const& cost)
{
    int const n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
    std::vector<double> treedist(static_cast<std::size_t>(n * m), 0.0);
    std::vector<double> fd(static_cast<std::size_t>((n + 1) * (m + 1)), 0.0);
    auto TD = [&](int i, int j) -> double& { return treedist[static_cast<std::size_t>(i * m + j)]; };
    int const W = m + 1;

    for (int i : a.keyroots) {
        for (int j : b.keyroots) {
            int const li = a.leftmost[static_cast<std::size_t>(i)];
            int const lj = b.leftmost[static_cast<std::size_t>(j)];
            int const rows = i - li + 2, cols = j - lj + 2;
            // fd(x, y): forest a[li..li+x-1] vs b[lj..lj+y-1].
            auto FD = [&](int x, int y) -> double& { return fd[static_cast<std::size_t>(x * W + y)]; };
            FD(0, 0) = 0.0;
            for (int x = 1; x < rows; ++x) FD(x, 0) = FD(x - 1, 0) + cost.remove;
            for (int y = 1; y < cols; ++y) FD(0, y) = FD(0, y - 1) + cost.insert;
            for (int x = 1; x < rows; ++x) {
                int const ai = li + x - 1;
                int const lai = a.leftmost[static_cast<std::size_t>(ai)];
                for (int y = 1; y < cols; ++y) {
                    int const bj = lj + y - 1;
                    int const lbj = b.leftmost[static_cast<std::size_t>(bj)];
                    double const del = FD(x - 1, y) + cost.remove;
                    double const ins = FD(x, y - 1) + cost.insert;
                    if (lai == li && lbj == lj) {
                        double const sub = FD(x - 1, y - 1) +
                                           cost.relabel_cost(a.labels[static_cast<std::size_t>(ai)],
                                                             b.labels[static_cast<std::size_t>(bj)]);
                        FD(x, y) = std::min({del, ins, sub});
                        TD(ai, bj) = FD(x, y);
                    }
                    else {
                        double const sub = FD(lai - li, lbj - lj) + TD(ai, bj);
                        FD(x, y) = std::min({del, ins, sub});
                    }
                }
            }
        }
    }
    return TD(n - 1, m - 1);
}

double ted(LabeledTree const& a, LabeledTree const& b, EditCost const& cost)
{
    return ted(PostorderTree(a), PostorderTree(b), cost);
}

long ted_canonical(Expr const& pred, Expr const& target, CanonConfig const& cfg)
{
    auto const a = canonicalize(pred, cfg);
    auto const b = canonicalize(target, cfg);
    return std::lround(ted(as_labeled(a.tree), as_labeled(b.tree)));
}

} // namespace srlab
