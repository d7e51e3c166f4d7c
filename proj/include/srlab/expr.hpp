#ifndef SRLAB_EXPR_HPP
#define SRLAB_EXPR_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "srlab/rng.hpp"

namespace srlab {

using ParamVector = Eigen::VectorXd;

enum class Op : std::uint8_t {
    // binary
    Add, Sub, Mul, Div,
    // unary
    Square, Cube, Sqrt, Sin, Cos, Tan, Tanh, Abs, Ln, Exp, ExpNeg,
    // leaves
    Var, Const, Erc,
};

constexpr int arity(Op op) noexcept
{
    switch (op) {
    case Op::Add: case Op::Sub: case Op::Mul: case Op::Div:
        return 2;
    case Op::Var: case Op::Const: case Op::Erc:
        return 0;
    default:
        return 1;
    }
}

constexpr bool is_leaf(Op op) noexcept { return arity(op) == 0; }

// Prefix-notation name ("add", "sin", "expneg", ...). Leaves: "x", "const", "erc".
std::string_view op_name(Op op) noexcept;
std::optional<Op> op_from_name(std::string_view name) noexcept;

// The fifteen non-leaf operators, in declaration order.
std::vector<Op> const& all_operators();

// Ordered rooted expression tree. A value type: copies are deep.
class Expr {
public:
    Expr() = default;

    static Expr var() { return Expr(Op::Var); }
    static Expr constant(double v)
    {
        Expr e(Op::Const);
        e.value_ = v;
        return e;
    }
    static Expr erc(std::size_t slot)
    {
        Expr e(Op::Erc);
        e.slot_ = slot;
        return e;
    }
    static Expr unary(Op op, Expr a);
    static Expr binary(Op op, Expr a, Expr b);
    static Expr make(Op op, std::vector<Expr> children);

    Op op() const noexcept { return op_; }
    double value() const noexcept { return value_; }
    std::size_t slot() const noexcept { return slot_; }
    std::vector<Expr> const& children() const noexcept { return children_; }
    std::vector<Expr>& children() noexcept { return children_; }
    Expr const& child(std::size_t i) const { return children_[i]; }

    void set_value(double v) noexcept { value_ = v; }

    friend bool operator==(Expr const&, Expr const&) = default;

private:
    explicit Expr(Op op) : op_(op) {}

    Op op_ = Op::Var;
    double value_ = 0.0;
    std::size_t slot_ = 0;
    std::vector<Expr> children_;
};

std::size_t size(Expr const& tree);
// Depth of a single leaf is 1.
std::size_t depth(Expr const& tree);

// Number of ERC slots referenced, i.e. max slot + 1 (0 if none).
std::size_t erc_count(Expr const& tree);
bool has_constants(Expr const& tree);

// Preorder addressing, used by the variation operators.
Expr const& node_at(Expr const& tree, std::size_t preorder);
Expr& node_at(Expr& tree, std::size_t preorder);
// Depth (root = 1) of the node at a preorder position.
std::size_t depth_at(Expr const& tree, std::size_t preorder);

struct ErcSplit {
    Expr tree;
    ParamVector params;
};

// Replaces every const leaf with erc(i) in preorder and collects the values.
// Existing erc leaves are not allowed.
ErcSplit extract_ercs(Expr const& tree);

// Inverse of extract_ercs. Throws std::invalid_argument on length mismatch.
Expr substitute_params(Expr const& tree, ParamVector const& params);

// Evaluates the tree on every sample. Returns nullopt (nonviable) if any node
// produces a non-finite value at any sample. Throws std::invalid_argument if
// params does not match the tree's ERC count.
std::optional<Eigen::ArrayXd> evaluate(Expr const& tree, ParamVector const& params,
                                       Eigen::Ref<Eigen::ArrayXd const> const& xs);

// Single-point scalar evaluation; NaN/inf are returned as is.
double evaluate_at(Expr const& tree, ParamVector const& params, double x);

// Canonical prefix serialization, e.g. "(add (mul 24.3 x) 1.57)".
// Constants use the shortest round-trip decimal; erc leaves print as c0, c1, ...
std::string to_prefix(Expr const& tree);
// Value-blind variant: constants and ERCs both print as "c".
std::string to_shape(Expr const& tree);
// Throws std::invalid_argument with a position on malformed input.
Expr parse_prefix(std::string_view text);

std::string format_double(double v);

class BasisSet {
public:
    // Arithmetic operators are always added.
    explicit BasisSet(std::vector<Op> extra = {}, bool include_constants = true);

    static BasisSet standard();

    std::vector<Op> const& operators() const noexcept { return operators_; }
    bool include_constants() const noexcept { return includeConstants_; }
    bool contains(Op op) const noexcept;

    friend bool operator==(BasisSet const&, BasisSet const&) = default;

private:
    std::vector<Op> operators_;
    bool includeConstants_ = true;
};

// Ramped half-and-half: picks a target depth uniformly in [1, max_depth] and
// builds either a full or a grow tree to it. Leaves are x or N(0,1) constants.
Expr random_tree(BasisSet const& basis, std::size_t max_depth, Rng& rng);

enum class TreeShape { Full, Grow };
Expr random_tree(BasisSet const& basis, std::size_t depth, TreeShape shape, Rng& rng);

// Evaluator bound to a fixed tree and sample grid. Subtrees that do not depend
// on ERC slots are computed once at construction; run() only recomputes the
// parameter-dependent path. Subtrees free of x are evaluated as scalars and
// broadcast. Not thread-safe; cheap to construct per worker.
class CompiledExpr {
public:
    CompiledExpr(Expr const& tree, Eigen::Ref<Eigen::ArrayXd const> const& xs);

    std::size_t param_count() const noexcept { return paramCount_; }
    std::size_t sample_count() const noexcept { return static_cast<std::size_t>(buffer_.rows()); }

    // Returns false when nonviable.
    bool run(ParamVector const& params);

    // Result of the last successful run().
    auto output() const { return buffer_.col(buffer_.cols() - 1); }

private:
    struct Instr {
        Op op;
        int lhs = -1;
        int rhs = -1;
        double value = 0.0;
        std::size_t slot = 0;
        bool dependent = false;
        bool vector = false; // depends on x
        bool check = false;  // finiteness must be tested here (see compute)
        Eigen::Index col = -1;
    };

    int emit(Expr const& node);
    bool compute(std::size_t i, ParamVector const* params);

    std::vector<Instr> program_;
    std::vector<double> scalars_;
    Eigen::ArrayXXd buffer_;
    Eigen::ArrayXd xs_;
    std::size_t paramCount_ = 0;
    bool staticViable_ = true;
};

} // namespace srlab

#endif
