#ifndef SRLAB_TED_HPP
#define SRLAB_TED_HPP

#include <functional>
#include <string>
#include <vector>

#include "srlab/expr.hpp"

namespace srlab {

struct CanonConfig;

struct LabeledTree {
    std::string label;
    std::vector<LabeledTree> children;

    friend bool operator==(LabeledTree const&, LabeledTree const&) = default;
};

// Operator names for internal nodes, "x" for the variable, "c" for constants
// and erc leaves alike.
LabeledTree as_labeled(Expr const& e);
// Reads the expr prefix syntax loosely: any token is a label.
LabeledTree parse_labeled(std::string_view text);
std::size_t tree_size(LabeledTree const& t) noexcept;

struct EditCost {
    double insert = 1.0;
    double remove = 1.0;
    // Cost of relabelling a to b; unit cost when empty.
    std::function<double(std::string const&, std::string const&)> relabel;

    double relabel_cost(std::string const& a, std::string const& b) const
    {
        return relabel ? relabel(a, b) : (a == b ? 0.0 : 1.0);
    }
};

// Postorder arrays used by the dynamic program; building them once lets
// repeated comparisons skip the conversion.
struct PostorderTree {
    std::vector<std::string> labels;
    std::vector<int> leftmost; // leftmost leaf descendant, postorder index
    std::vector<int> keyroots;

    explicit PostorderTree(LabeledTree const& t);
    std::size_t size() const noexcept { return labels.size(); }
};

// Zhang-Shasha ordered tree edit distance.
double ted(PostorderTree const& a, PostorderTree const& b, EditCost const& cost = {});
double ted(LabeledTree const& a, LabeledTree const& b, EditCost const& cost = {});

// Unit-cost distance between the canonical forms of two concrete trees.
long ted_canonical(Expr const& pred, Expr const& target, CanonConfig const& cfg);

} // namespace srlab

#endif
