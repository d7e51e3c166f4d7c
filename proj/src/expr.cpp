#include "srlab/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <system_error>

namespace srlab {

namespace {

struct OpInfo {
    Op op;
    std::string_view name;
};

constexpr std::array<OpInfo, 18> kOpTable{{
    {Op::Add, "add"}, {Op::Sub, "sub"}, {Op::Mul, "mul"}, {Op::Div, "div"},
    {Op::Square, "square"}, {Op::Cube, "cube"}, {Op::Sqrt, "sqrt"},
    {Op::Sin, "sin"}, {Op::Cos, "cos"}, {Op::Tan, "tan"}, {Op::Tanh, "tanh"},
    {Op::Abs, "abs"}, {Op::Ln, "ln"}, {Op::Exp, "exp"}, {Op::ExpNeg, "expneg"},
    {Op::Var, "x"}, {Op::Const, "const"}, {Op::Erc, "erc"},
}};

std::size_t count_nodes(Expr const& e)
{
    std::size_t n = 1;
    for (auto const& c : e.children()) n += count_nodes(c);
    return n;
}

template <typename Tree>
Tree& locate(Tree& root, std::size_t target, std::size_t& cursor, std::size_t level, std::size_t& depthOut, bool& found)
{
    if (cursor == target) {
        found = true;
        depthOut = level;
        return root;
    }
    ++cursor;
    for (auto& c : root.children()) {
        Tree& hit = locate(c, target, cursor, level + 1, depthOut, found);
        if (found) return hit;
    }
    return root;
}

void extract_into(Expr const& src, Expr& dst, std::vector<double>& values)
{
    switch (src.op()) {
    case Op::Const:
        dst = Expr::erc(values.size());
        values.push_back(src.value());
        return;
    case Op::Erc:
        throw std::invalid_argument("extract_ercs: tree already contains erc leaves");
    default:
        break;
    }
    std::vector<Expr> kids(src.children().size());
    for (std::size_t i = 0; i < kids.size(); ++i) extract_into(src.child(i), kids[i], values);
    dst = Expr::make(src.op(), std::move(kids));
}

Expr substitute(Expr const& e, ParamVector const& p)
{
    if (e.op() == Op::Erc) return Expr::constant(p[static_cast<Eigen::Index>(e.slot())]);
    if (is_leaf(e.op())) return e;
    std::vector<Expr> kids;
    kids.reserve(e.children().size());
    for (auto const& c : e.children()) kids.push_back(substitute(c, p));
    return Expr::make(e.op(), std::move(kids));
}

void write_prefix(Expr const& e, std::string& out, bool valueBlind)
{
    switch (e.op()) {
    case Op::Var:
        out += 'x';
        return;
    case Op::Const:
        out += valueBlind ? "c" : format_double(e.value());
        return;
    case Op::Erc:
        out += 'c';
        if (!valueBlind) out += std::to_string(e.slot());
        return;
    default:
        break;
    }
    out += '(';
    out += op_name(e.op());
    for (auto const& c : e.children()) {
        out += ' ';
        write_prefix(c, out, valueBlind);
    }
    out += ')';
}

class PrefixParser {
public:
    explicit PrefixParser(std::string_view text) : text_(text) {}

    Expr parse()
    {
        Expr e = expr();
        skip_ws();
        if (pos_ != text_.size()) fail("trailing input");
        return e;
    }

private:
    [[noreturn]] void fail(std::string const& what) const
    {
        throw std::invalid_argument("parse_prefix: " + what + " at offset " + std::to_string(pos_) + " in '" +
                                    std::string(text_) + "'");
    }

    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    std::string_view token()
    {
        skip_ws();
        std::size_t const start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
               text_[pos_] != ')')
            ++pos_;
        if (start == pos_) fail("expected a token");
        return text_.substr(start, pos_ - start);
    }

    Expr expr()
    {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        if (text_[pos_] == '(') {
            ++pos_;
            auto const name = token();
            auto const op = op_from_name(name);
            if (!op || is_leaf(*op)) fail("unknown operator '" + std::string(name) + "'");
            std::vector<Expr> kids;
            for (int i = 0; i < arity(*op); ++i) kids.push_back(expr());
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != ')') fail("expected ')' closing '" + std::string(name) + "'");
            ++pos_;
            return Expr::make(*op, std::move(kids));
        }
        if (text_[pos_] == ')') fail("unexpected ')'");
        return atom(token());
    }

    Expr atom(std::string_view tok)
    {
        if (tok == "x") return Expr::var();
        if (tok.size() > 1 && tok[0] == 'c' && std::isdigit(static_cast<unsigned char>(tok[1]))) {
            std::size_t slot = 0;
            auto [ptr, ec] = std::from_chars(tok.data() + 1, tok.data() + tok.size(), slot);
            if (ec != std::errc{} || ptr != tok.data() + tok.size()) fail("bad erc token '" + std::string(tok) + "'");
            return Expr::erc(slot);
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || ptr != tok.data() + tok.size()) fail("bad atom '" + std::string(tok) + "'");
        return Expr::constant(v);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

Expr make_leaf(BasisSet const& basis, Rng& rng)
{
    if (basis.include_constants() && rng.bernoulli(0.5)) return Expr::constant(rng.normal());
    return Expr::var();
}

Expr grow(BasisSet const& basis, std::size_t depth, TreeShape shape, Rng& rng)
{
    auto const& ops = basis.operators();
    if (depth <= 1) return make_leaf(basis, rng);
    if (shape == TreeShape::Grow) {
        // Terminals compete with operators on equal footing.
        std::size_t const pick = rng.index(ops.size() + 2);
        if (pick >= ops.size()) return make_leaf(basis, rng);
        Op const op = ops[pick];
        std::vector<Expr> kids;
        for (int i = 0; i < arity(op); ++i) kids.push_back(grow(basis, depth - 1, shape, rng));
        return Expr::make(op, std::move(kids));
    }
    Op const op = ops[rng.index(ops.size())];
    std::vector<Expr> kids;
    for (int i = 0; i < arity(op); ++i) kids.push_back(grow(basis, depth - 1, shape, rng));
    return Expr::make(op, std::move(kids));
}

} // namespace

std::string_view op_name(Op op) noexcept
{
    for (auto const& info : kOpTable)
        if (info.op == op) return info.name;
    return "?";
}

std::optional<Op> op_from_name(std::string_view name) noexcept
{
    for (auto const& info : kOpTable)
        if (info.name == name) return info.op;
    return std::nullopt;
}

std::vector<Op> const& all_operators()
{
    static std::vector<Op> const ops{Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Square, Op::Cube, Op::Sqrt, Op::Sin,
                                     Op::Cos, Op::Tan, Op::Tanh, Op::Abs, Op::Ln, Op::Exp, Op::ExpNeg};
    return ops;
}

Expr Expr::unary(Op op, Expr a)
{
    std::vector<Expr> kids;
    kids.push_back(std::move(a));
    return make(op, std::move(kids));
}

Expr Expr::binary(Op op, Expr a, Expr b)
{
    std::vector<Expr> kids;
    kids.reserve(2);
    kids.push_back(std::move(a));
    kids.push_back(std::move(b));
    return make(op, std::move(kids));
}

Expr Expr::make(Op op, std::vector<Expr> children)
{
    if (static_cast<int>(children.size()) != arity(op))
        throw std::invalid_argument("Expr::make: '" + std::string(op_name(op)) + "' expects " +
                                    std::to_string(arity(op)) + " children, got " + std::to_string(children.size()));
    Expr e(op);
    e.children_ = std::move(children);
    return e;
}

std::size_t size(Expr const& tree) { return count_nodes(tree); }

std::size_t depth(Expr const& tree)
{
    std::size_t d = 0;
    for (auto const& c : tree.children()) d = std::max(d, depth(c));
    return d + 1;
}

std::size_t erc_count(Expr const& tree)
{
    std::size_t n = tree.op() == Op::Erc ? tree.slot() + 1 : 0;
    for (auto const& c : tree.children()) n = std::max(n, erc_count(c));
    return n;
}

bool has_constants(Expr const& tree)
{
    if (tree.op() == Op::Const) return true;
    return std::any_of(tree.children().begin(), tree.children().end(), [](Expr const& c) { return has_constants(c); });
}

Expr const& node_at(Expr const& tree, std::size_t preorder)
{
    std::size_t cursor = 0, d = 0;
    bool found = false;
    Expr const& hit = locate(tree, preorder, cursor, 1, d, found);
    if (!found) throw std::out_of_range("node_at: preorder index out of range");
    return hit;
}

Expr& node_at(Expr& tree, std::size_t preorder)
{
    std::size_t cursor = 0, d = 0;
    bool found = false;
    Expr& hit = locate(tree, preorder, cursor, 1, d, found);
    if (!found) throw std::out_of_range("node_at: preorder index out of range");
    return hit;
}

std::size_t depth_at(Expr const& tree, std::size_t preorder)
{
    std::size_t cursor = 0, d = 0;
    bool found = false;
    locate(tree, preorder, cursor, 1, d, found);
    if (!found) throw std::out_of_range("depth_at: preorder index out of range");
    return d;
}

ErcSplit extract_ercs(Expr const& tree)
{
    std::vector<double> values;
    Expr out;
    extract_into(tree, out, values);
    return {std::move(out), Eigen::Map<ParamVector const>(values.data(), static_cast<Eigen::Index>(values.size()))};
}

Expr substitute_params(Expr const& tree, ParamVector const& params)
{
    if (erc_count(tree) != static_cast<std::size_t>(params.size()))
        throw std::invalid_argument("substitute_params: tree has " + std::to_string(erc_count(tree)) +
                                    " erc slots but " + std::to_string(params.size()) + " params were given");
    return substitute(tree, params);
}

std::optional<Eigen::ArrayXd> evaluate(Expr const& tree, ParamVector const& params,
                                       Eigen::Ref<Eigen::ArrayXd const> const& xs)
{
    CompiledExpr compiled(tree, xs);
    if (compiled.param_count() != static_cast<std::size_t>(params.size()))
        throw std::invalid_argument("evaluate: tree has " + std::to_string(compiled.param_count()) +
                                    " erc slots but " + std::to_string(params.size()) + " params were given");
    if (!compiled.run(params)) return std::nullopt;
    return Eigen::ArrayXd(compiled.output());
}

double evaluate_at(Expr const& tree, ParamVector const& params, double x)
{
    auto arg = [&](std::size_t i) { return evaluate_at(tree.child(i), params, x); };
    switch (tree.op()) {
    case Op::Var: return x;
    case Op::Const: return tree.value();
    case Op::Erc: return params[static_cast<Eigen::Index>(tree.slot())];
    case Op::Add: return arg(0) + arg(1);
    case Op::Sub: return arg(0) - arg(1);
    case Op::Mul: return arg(0) * arg(1);
    case Op::Div: return arg(0) / arg(1);
    case Op::Square: { double a = arg(0); return a * a; }
    case Op::Cube: { double a = arg(0); return a * a * a; }
    case Op::Sqrt: return std::sqrt(arg(0));
    case Op::Sin: return std::sin(arg(0));
    case Op::Cos: return std::cos(arg(0));
    case Op::Tan: return std::tan(arg(0));
    case Op::Tanh: return std::tanh(arg(0));
    case Op::Abs: return std::abs(arg(0));
    case Op::Ln: return std::log(arg(0));
    case Op::Exp: return std::exp(arg(0));
    case Op::ExpNeg: return std::exp(-arg(0));
    }
    return std::numeric_limits<double>::quiet_NaN();
}

std::string format_double(double v)
{
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::string to_prefix(Expr const& tree)
{
    std::string out;
    write_prefix(tree, out, false);
    return out;
}

std::string to_shape(Expr const& tree)
{
    std::string out;
    write_prefix(tree, out, true);
    return out;
}

Expr parse_prefix(std::string_view text) { return PrefixParser(text).parse(); }

BasisSet::BasisSet(std::vector<Op> extra, bool include_constants) : includeConstants_(include_constants)
{
    operators_ = {Op::Add, Op::Sub, Op::Mul, Op::Div};
    for (Op op : extra) {
        if (is_leaf(op)) throw std::invalid_argument("BasisSet: leaf '" + std::string(op_name(op)) + "' is not an operator");
        operators_.push_back(op);
    }
    std::sort(operators_.begin(), operators_.end());
    operators_.erase(std::unique(operators_.begin(), operators_.end()), operators_.end());
}

BasisSet BasisSet::standard() { return BasisSet(all_operators()); }

bool BasisSet::contains(Op op) const noexcept
{
    return std::binary_search(operators_.begin(), operators_.end(), op);
}

Expr random_tree(BasisSet const& basis, std::size_t max_depth, Rng& rng)
{
    if (max_depth < 1) throw std::invalid_argument("random_tree: max_depth must be >= 1");
    std::size_t const target = 1 + rng.index(max_depth);
    TreeShape const shape = rng.bernoulli(0.5) ? TreeShape::Full : TreeShape::Grow;
    return grow(basis, target, shape, rng);
}

Expr random_tree(BasisSet const& basis, std::size_t depth, TreeShape shape, Rng& rng)
{
    if (depth < 1) throw std::invalid_argument("random_tree: depth must be >= 1");
    return grow(basis, depth, shape, rng);
}

CompiledExpr::CompiledExpr(Expr const& tree, Eigen::Ref<Eigen::ArrayXd const> const& xs) : xs_(xs)
{
    if (xs_.size() == 0) throw std::invalid_argument("CompiledExpr: empty sample grid");
    program_.reserve(size(tree));
    emit(tree);
    scalars_.assign(program_.size(), 0.0);

    // A non-finite child always yields a non-finite parent except under these
    // operators, so only their inputs and the root need an explicit test.
    Eigen::Index cols = 0;
    for (Instr& in : program_) {
        if (in.vector) in.col = cols++;
        if (in.op == Op::Tanh || in.op == Op::Exp || in.op == Op::ExpNeg)
            program_[static_cast<std::size_t>(in.lhs)].check = true;
        if (in.op == Op::Div) program_[static_cast<std::size_t>(in.rhs)].check = true;
    }
    program_.back().check = true;
    if (!program_.back().vector) ++cols;
    buffer_.resize(xs_.size(), cols);

    for (std::size_t i = 0; i < program_.size(); ++i) {
        if (program_[i].dependent) continue;
        if (!compute(i, nullptr)) staticViable_ = false;
    }
    if (!program_.back().vector) buffer_.col(cols - 1).setConstant(scalars_.back());
}

int CompiledExpr::emit(Expr const& node)
{
    Instr in{node.op()};
    if (node.op() == Op::Const) in.value = node.value();
    if (node.op() == Op::Var) in.vector = true;
    if (node.op() == Op::Erc) {
        in.slot = node.slot();
        in.dependent = true;
        paramCount_ = std::max(paramCount_, node.slot() + 1);
    }
    for (std::size_t k = 0; k < node.children().size(); ++k) {
        int const child = emit(node.child(k));
        Instr const& c = program_[static_cast<std::size_t>(child)];
        in.dependent = in.dependent || c.dependent;
        in.vector = in.vector || c.vector;
        (k == 0 ? in.lhs : in.rhs) = child;
    }
    program_.push_back(in);
    return static_cast<int>(program_.size() - 1);
}

namespace {

double apply_scalar(Op op, double a, double b)
{
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    case Op::Square: return a * a;
    case Op::Cube: return a * a * a;
    case Op::Sqrt: return std::sqrt(a);
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Tan: return std::tan(a);
    case Op::Tanh: return std::tanh(a);
    case Op::Abs: return std::abs(a);
    case Op::Ln: return std::log(a);
    case Op::Exp: return std::exp(a);
    case Op::ExpNeg: return std::exp(-a);
    case Op::Var:
    case Op::Const:
    case Op::Erc: break;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

template <class Out, class A, class B>
void apply_binary(Op op, Out&& out, A const& a, B const& b)
{
    switch (op) {
    case Op::Add: out = a + b; break;
    case Op::Sub: out = a - b; break;
    case Op::Mul: out = a * b; break;
    case Op::Div: out = a / b; break;
    default: break;
    }
}

} // namespace

bool CompiledExpr::compute(std::size_t i, ParamVector const* params)
{
    Instr const& in = program_[i];
    if (!in.vector) {
        double v = 0.0;
        if (in.op == Op::Const) v = in.value;
        else if (in.op == Op::Erc) v = (*params)[static_cast<Eigen::Index>(in.slot)];
        else v = apply_scalar(in.op, scalars_[static_cast<std::size_t>(in.lhs)],
                              in.rhs < 0 ? 0.0 : scalars_[static_cast<std::size_t>(in.rhs)]);
        scalars_[i] = v;
        return std::isfinite(v);
    }

    auto out = buffer_.col(in.col);
    auto col = [&](int k) { return buffer_.col(program_[static_cast<std::size_t>(k)].col); };
    switch (in.op) {
    case Op::Var: out = xs_; return true;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
        Instr const& l = program_[static_cast<std::size_t>(in.lhs)];
        Instr const& r = program_[static_cast<std::size_t>(in.rhs)];
        if (l.vector && r.vector) apply_binary(in.op, out, col(in.lhs), col(in.rhs));
        else if (l.vector) apply_binary(in.op, out, col(in.lhs), scalars_[static_cast<std::size_t>(in.rhs)]);
        else apply_binary(in.op, out, scalars_[static_cast<std::size_t>(in.lhs)], col(in.rhs));
        break;
    }
    case Op::Square: out = col(in.lhs).square(); break;
    case Op::Cube: out = col(in.lhs).cube(); break;
    case Op::Sqrt: out = col(in.lhs).sqrt(); break;
    case Op::Sin: out = col(in.lhs).sin(); break;
    case Op::Cos: out = col(in.lhs).cos(); break;
    case Op::Tan: out = col(in.lhs).tan(); break;
    case Op::Tanh: out = col(in.lhs).tanh(); break;
    case Op::Abs: out = col(in.lhs).abs(); break;
    case Op::Ln: out = col(in.lhs).log(); break;
    case Op::Exp: out = col(in.lhs).exp(); break;
    case Op::ExpNeg: out = (-col(in.lhs)).exp(); break;
    case Op::Const:
    case Op::Erc: break;
    }
    return !in.check || out.isFinite().all();
}

bool CompiledExpr::run(ParamVector const& params)
{
    if (static_cast<std::size_t>(params.size()) != paramCount_)
        throw std::invalid_argument("CompiledExpr::run: expected " + std::to_string(paramCount_) + " params, got " +
                                    std::to_string(params.size()));
    if (!staticViable_) return false;
    for (std::size_t i = 0; i < program_.size(); ++i) {
        if (!program_[i].dependent) continue;
        if (!compute(i, &params)) return false;
    }
    if (!program_.back().vector) buffer_.col(buffer_.cols() - 1).setConstant(scalars_.back());
    return true;
}

} // namespace srlab
