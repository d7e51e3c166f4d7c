#include "srlab/canon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace srlab {

namespace {

// Internal normal form. A Sum is a constant plus monomials; a monomial is a
// coefficient times integer powers of bases. Bases are the variable, unary
// functions of a Sum, parenthesized sums (groups) and constants that could not
// be folded to a finite value.

struct Sum;

struct Base {
    enum class Kind { Var, Fn, Group, Const };
    Kind kind = Kind::Var;
    Op op = Op::Var;
    std::shared_ptr<Sum const> arg;
    double value = 0.0;
    std::string key;   // exact structure
    std::string blind; // constants masked
};

struct Factor {
    Base base;
    int exp = 1;
};

struct Mono {
    double coef = 1.0;
    std::vector<Factor> factors;
    std::string key; // factors only, coefficient excluded
    std::string blind;
    bool pureVar = true;
};

struct Sum {
    double constant = 0.0;
    std::vector<Mono> terms;
};

double clean(double v) { return v == 0.0 ? 0.0 : v; }

std::string sum_key(Sum const& s, bool blind)
{
    std::string k = blind ? "k" : format_double(s.constant);
    for (auto const& m : s.terms) {
        k += ';';
        k += blind ? "k" : format_double(m.coef);
        k += '*';
        k += blind ? m.blind : m.key;
    }
    return k;
}

void finalize(Base& b)
{
    switch (b.kind) {
    case Base::Kind::Var: b.key = b.blind = "x"; break;
    case Base::Kind::Const:
        b.key = "#" + format_double(b.value);
        b.blind = "#";
        break;
    case Base::Kind::Fn:
        b.key = std::string(op_name(b.op)) + "(" + sum_key(*b.arg, false) + ")";
        b.blind = std::string(op_name(b.op)) + "(" + sum_key(*b.arg, true) + ")";
        break;
    case Base::Kind::Group:
        b.key = "(" + sum_key(*b.arg, false) + ")";
        b.blind = "(" + sum_key(*b.arg, true) + ")";
        break;
    }
}

Base var_base()
{
    Base b;
    finalize(b);
    return b;
}

Base const_base(double v)
{
    Base b;
    b.kind = Base::Kind::Const;
    b.value = clean(v);
    finalize(b);
    return b;
}

Base fn_base(Op op, Sum arg)
{
    Base b;
    b.kind = Base::Kind::Fn;
    b.op = op;
    b.arg = std::make_shared<Sum const>(std::move(arg));
    finalize(b);
    return b;
}

Base group_base(Sum s)
{
    Base b;
    b.kind = Base::Kind::Group;
    b.arg = std::make_shared<Sum const>(std::move(s));
    finalize(b);
    return b;
}

bool base_less(Base const& a, Base const& b)
{
    if (a.blind != b.blind) return a.blind < b.blind;
    return a.key < b.key;
}

void finalize(Mono& m)
{
    std::sort(m.factors.begin(), m.factors.end(), [](Factor const& a, Factor const& b) { return base_less(a.base, b.base); });
    m.key.clear();
    m.blind.clear();
    m.pureVar = true;
    for (auto const& f : m.factors) {
        auto const e = "^" + std::to_string(f.exp) + " ";
        m.key += f.base.key + e;
        m.blind += f.base.blind + e;
        m.pureVar = m.pureVar && f.base.kind == Base::Kind::Var;
    }
}

// Constant first, then pure powers of x, then everything else; within a class
// by the value-blind key and then the exact key. Coefficients never affect the
// order, so negating a sum keeps its term order.
bool mono_less(Mono const& a, Mono const& b)
{
    if (a.pureVar != b.pureVar) return a.pureVar;
    if (a.blind != b.blind) return a.blind < b.blind;
    return a.key < b.key;
}

bool is_const(Sum const& s) { return s.terms.empty(); }
bool is_single(Sum const& s) { return s.constant == 0.0 && s.terms.size() == 1; }

Sum constant_sum(double v)
{
    Sum s;
    s.constant = clean(v);
    return s;
}

Sum from_mono(Mono m)
{
    if (m.coef == 0.0) return constant_sum(0.0);
    if (m.factors.empty()) return constant_sum(m.coef);
    Sum s;
    s.terms.push_back(std::move(m));
    return s;
}

double fold_unary(Op op, double v) { return evaluate_at(Expr::unary(op, Expr::constant(v)), ParamVector(0), 0.0); }

// Forward declarations for the mutually recursive builders.
Sum add(Sum a, Sum const& b);
Sum mul(Sum const& a, Sum const& b);
Sum scale(Sum const& s, double c);
Sum power(Sum const& s, int n);
Sum apply_fn(Op op, Sum const& s);
Sum normalize(Mono m);

void collect(Sum& s)
{
    std::vector<Mono> merged;
    for (auto& m : s.terms) {
        auto it = std::find_if(merged.begin(), merged.end(), [&](Mono const& o) { return o.key == m.key; });
        if (it == merged.end())
            merged.push_back(std::move(m));
        else
            it->coef += m.coef;
    }
    std::erase_if(merged, [](Mono const& m) { return m.coef == 0.0; });
    std::sort(merged.begin(), merged.end(), mono_less);
    s.terms = std::move(merged);
    s.constant = clean(s.constant);
}

Sum add(Sum a, Sum const& b)
{
    a.constant += b.constant;
    a.terms.insert(a.terms.end(), b.terms.begin(), b.terms.end());
    collect(a);
    return a;
}

// A parenthesized sum raised to n, made primitive: the leading monomial's
// coefficient is pulled out so (2x + 2)^n and 2^n (x + 1)^n agree.
Mono group_mono(Sum s, int n)
{
    double content = 1.0;
    double const lead = s.terms.front().coef;
    if (lead != 1.0) {
        double const cn = std::pow(lead, n);
        bool ok = std::isfinite(cn) && cn != 0.0 && std::isfinite(s.constant / lead);
        for (auto const& m : s.terms) ok = ok && std::isfinite(m.coef / lead) && m.coef / lead != 0.0;
        if (ok) {
            s.constant = clean(s.constant / lead);
            for (auto& m : s.terms) m.coef /= lead;
            content = cn;
        }
    }
    Mono m;
    m.coef = content;
    m.factors.push_back({group_base(std::move(s)), n});
    return m;
}

Mono as_mono(Sum const& s)
{
    if (is_const(s)) {
        Mono m;
        m.coef = s.constant;
        return m;
    }
    if (is_single(s)) return s.terms.front();
    return group_mono(s, 1);
}

Sum scale(Sum const& s, double c)
{
    if (c == 1.0) return s;
    if (c == 0.0) return constant_sum(0.0);
    Sum out = s;
    out.constant = clean(out.constant * c);
    bool ok = std::isfinite(out.constant);
    for (auto& m : out.terms) {
        m.coef *= c;
        ok = ok && std::isfinite(m.coef) && m.coef != 0.0;
    }
    if (ok) return out;
    // Overflow: keep c as an opaque factor instead of folding it.
    Mono m = as_mono(s);
    m.factors.push_back({const_base(c), 1});
    return normalize(std::move(m));
}

Sum mono_product(Mono a, Mono const& b)
{
    double const coef = a.coef * b.coef;
    a.factors.insert(a.factors.end(), b.factors.begin(), b.factors.end());
    if (std::isfinite(coef))
        a.coef = coef;
    else
        a.factors.push_back({const_base(b.coef), 1});
    return normalize(std::move(a));
}

Sum mul(Sum const& a, Sum const& b)
{
    if (is_const(a)) return scale(b, a.constant);
    if (is_const(b)) return scale(a, b.constant);
    return mono_product(as_mono(a), as_mono(b));
}

Sum power(Sum const& s, int n)
{
    if (n == 1) return s;
    if (is_const(s)) {
        double const v = std::pow(s.constant, n);
        if (std::isfinite(v)) return constant_sum(v);
        Mono m;
        m.factors.push_back({const_base(s.constant), n});
        return normalize(std::move(m));
    }
    if (is_single(s)) {
        Mono m = s.terms.front();
        double const c = std::pow(m.coef, n);
        for (auto& f : m.factors) f.exp *= n;
        if (std::isfinite(c) && c != 0.0)
            m.coef = c;
        else {
            m.factors.push_back({const_base(m.coef), n});
            m.coef = 1.0;
        }
        return normalize(std::move(m));
    }
    return normalize(group_mono(s, n));
}

Sum base_sum(Base const& b)
{
    if (b.kind == Base::Kind::Group) return *b.arg;
    Mono m;
    m.factors.push_back({b, 1});
    finalize(m);
    return from_mono(std::move(m));
}

bool nonnegative_base(Base const& b)
{
    return b.kind == Base::Kind::Fn && (b.op == Op::Abs || b.op == Op::Exp || b.op == Op::Sqrt);
}

// |B|^e as a factor.
Factor abs_factor(Base const& b, int e)
{
    if (e % 2 == 0 || nonnegative_base(b)) return {b, e};
    if (b.kind == Base::Kind::Const) return {const_base(std::abs(b.value)), e};
    return {fn_base(Op::Abs, base_sum(b)), e};
}

// Merges equal bases, folds constant bases, rewrites |u|^even as u^even and
// distributes a coefficient over a lone group.
Sum normalize(Mono m)
{
    if (m.coef == 0.0) return constant_sum(0.0);
    std::vector<Factor> merged;
    for (auto& f : m.factors) {
        auto it = std::find_if(merged.begin(), merged.end(), [&](Factor const& o) { return o.base.key == f.base.key; });
        if (it == merged.end())
            merged.push_back(std::move(f));
        else
            it->exp += f.exp;
    }
    std::erase_if(merged, [](Factor const& f) { return f.exp == 0; });

    std::vector<Sum> extra;
    std::vector<Factor> kept;
    for (auto& f : merged) {
        if (f.base.kind == Base::Kind::Const) {
            double const v = std::pow(f.base.value, f.exp);
            if (std::isfinite(v) && std::isfinite(m.coef * v) && m.coef * v != 0.0) {
                m.coef *= v;
                continue;
            }
        }
        if (f.base.kind == Base::Kind::Fn && f.base.op == Op::Abs && f.exp % 2 == 0) {
            extra.push_back(power(*f.base.arg, f.exp));
            continue;
        }
        kept.push_back(std::move(f));
    }
    m.factors = std::move(kept);

    if (!extra.empty()) {
        Sum out = from_mono(std::move(m));
        if (!out.terms.empty()) finalize(out.terms.front());
        for (auto const& e : extra) out = mul(out, e);
        return out;
    }
    if (m.factors.size() == 1 && m.factors.front().exp == 1 && m.factors.front().base.kind == Base::Kind::Group)
        return scale(*m.factors.front().base.arg, m.coef);
    finalize(m);
    return from_mono(std::move(m));
}

bool leading_negative(Sum const& s) { return !s.terms.empty() && s.terms.front().coef < 0.0; }

Sum fn_sum(Op op, Sum arg)
{
    Mono m;
    m.factors.push_back({fn_base(op, std::move(arg)), 1});
    finalize(m);
    return from_mono(std::move(m));
}

Sum apply_fn(Op op, Sum const& s)
{
    if (is_const(s)) {
        double const v = fold_unary(op, s.constant);
        if (std::isfinite(v)) return constant_sum(v);
        return fn_sum(op, s);
    }
    switch (op) {
    case Op::Sin:
    case Op::Tan:
    case Op::Tanh:
        if (leading_negative(s)) return scale(apply_fn(op, scale(s, -1.0)), -1.0);
        return fn_sum(op, s);
    case Op::Cos:
        if (leading_negative(s)) return apply_fn(op, scale(s, -1.0));
        return fn_sum(op, s);
    case Op::Abs:
        if (is_single(s)) {
            Mono const& t = s.terms.front();
            Mono m;
            m.coef = std::abs(t.coef);
            for (auto const& f : t.factors) m.factors.push_back(abs_factor(f.base, f.exp));
            return normalize(std::move(m));
        }
        if (leading_negative(s)) return fn_sum(op, scale(s, -1.0));
        return fn_sum(op, s);
    case Op::Sqrt:
        if (is_single(s) && s.terms.front().coef > 0.0) {
            Mono const& t = s.terms.front();
            bool const even = std::all_of(t.factors.begin(), t.factors.end(), [](Factor const& f) { return f.exp % 2 == 0; });
            if (even) {
                Mono m;
                m.coef = std::sqrt(t.coef);
                for (auto const& f : t.factors) m.factors.push_back(abs_factor(f.base, f.exp / 2));
                return normalize(std::move(m));
            }
        }
        return fn_sum(op, s);
    default: return fn_sum(op, s);
    }
}

Sum to_sum(Expr const& e)
{
    switch (e.op()) {
    case Op::Var: {
        Mono m;
        m.factors.push_back({var_base(), 1});
        finalize(m);
        return from_mono(std::move(m));
    }
    case Op::Const:
        if (std::isfinite(e.value())) return constant_sum(e.value());
        {
            Mono m;
            m.factors.push_back({const_base(e.value()), 1});
            finalize(m);
            return from_mono(std::move(m));
        }
    case Op::Erc: throw std::invalid_argument("canonicalization expects concrete constants, found an erc leaf");
    case Op::Add: return add(to_sum(e.child(0)), to_sum(e.child(1)));
    case Op::Sub: return add(to_sum(e.child(0)), scale(to_sum(e.child(1)), -1.0));
    case Op::Mul: return mul(to_sum(e.child(0)), to_sum(e.child(1)));
    case Op::Div: return mul(to_sum(e.child(0)), power(to_sum(e.child(1)), -1));
    case Op::Square: return power(to_sum(e.child(0)), 2);
    case Op::Cube: return power(to_sum(e.child(0)), 3);
    case Op::ExpNeg: return apply_fn(Op::Exp, scale(to_sum(e.child(0)), -1.0));
    default: return apply_fn(e.op(), to_sum(e.child(0)));
    }
}

// Emission ------------------------------------------------------------------

Expr emit(Sum const& s);

Expr emit_base(Base const& b)
{
    switch (b.kind) {
    case Base::Kind::Var: return Expr::var();
    case Base::Kind::Const: return Expr::constant(b.value);
    case Base::Kind::Fn: return Expr::unary(b.op, emit(*b.arg));
    case Base::Kind::Group: return emit(*b.arg);
    }
    return Expr::var();
}

Expr emit_power(Base const& b, int e)
{
    if (e == 1) return emit_base(b);
    if (e == 2) return Expr::unary(Op::Square, emit_base(b));
    if (e == 3) return Expr::unary(Op::Cube, emit_base(b));
    if (e % 3 == 0) return Expr::unary(Op::Cube, emit_power(b, e / 3));
    if (e % 2 == 0) return Expr::unary(Op::Square, emit_power(b, e / 2));
    return Expr::binary(Op::Mul, emit_power(b, e - 1), emit_base(b));
}

Expr product(std::vector<Expr> items)
{
    Expr acc = std::move(items.front());
    for (std::size_t i = 1; i < items.size(); ++i) acc = Expr::binary(Op::Mul, std::move(acc), std::move(items[i]));
    return acc;
}

Expr emit_mono(Mono const& m)
{
    std::vector<Expr> num, den;
    if (m.coef != 1.0) num.push_back(Expr::constant(m.coef));
    for (auto const& f : m.factors) {
        if (f.exp > 0)
            num.push_back(emit_power(f.base, f.exp));
        else
            den.push_back(emit_power(f.base, -f.exp));
    }
    if (num.empty()) num.push_back(Expr::constant(1.0));
    if (den.empty()) return product(std::move(num));
    return Expr::binary(Op::Div, product(std::move(num)), product(std::move(den)));
}

Expr emit(Sum const& s)
{
    std::vector<Expr> items;
    if (s.constant != 0.0 || s.terms.empty()) items.push_back(Expr::constant(s.constant));
    for (auto const& m : s.terms) items.push_back(emit_mono(m));
    Expr acc = std::move(items.front());
    for (std::size_t i = 1; i < items.size(); ++i) acc = Expr::binary(Op::Add, std::move(acc), std::move(items[i]));
    return acc;
}

Expr simplify_once(Expr const& tree) { return emit(to_sum(tree)); }

double round_to(double v, int precision)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*e", precision - 1, v);
    return std::strtod(buf, nullptr);
}

} // namespace

double rationalize_value(double v, int precision)
{
    if (precision < 1) throw std::invalid_argument("rationalize_value: precision must be at least 1");
    if (!std::isfinite(v)) return v;
    if (std::abs(v) <= std::pow(10.0, -precision)) return 0.0;
    double const r = round_to(v, precision);
    long double const tol = std::pow(10.0L, -precision) * (1.0L + 1e-9L);
    for (int q = 1; q <= 100; ++q) {
        long double const num = std::nearbyint(static_cast<long double>(r) * q);
        if (num == 0.0L) continue;
        long double const cand = num / q;
        if (std::abs(static_cast<long double>(r) - cand) <= tol * std::abs(cand))
            return clean(round_to(static_cast<double>(cand), precision));
    }
    return clean(r);
}

Expr rationalize_constants(Expr const& tree, CanonConfig const& cfg)
{
    if (tree.op() == Op::Const) return Expr::constant(rationalize_value(tree.value(), cfg.precision));
    if (is_leaf(tree.op())) return tree;
    std::vector<Expr> children;
    children.reserve(tree.children().size());
    for (auto const& c : tree.children()) children.push_back(rationalize_constants(c, cfg));
    return Expr::make(tree.op(), std::move(children));
}

Expr algebraic_simplify(Expr const& tree, CanonConfig const& cfg)
{
    Expr current = tree;
    for (int pass = 0; pass < std::max(cfg.max_rewrite_passes, 1); ++pass) {
        Expr next = simplify_once(current);
        if (next == current) break;
        current = std::move(next);
    }
    return current;
}

Expr recursive_simplify(Expr const& tree, CanonConfig const& cfg)
{
    Expr current;
    if (is_leaf(tree.op())) {
        current = rationalize_constants(tree, cfg);
    }
    else {
        std::vector<Expr> children;
        children.reserve(tree.children().size());
        for (auto const& c : tree.children()) children.push_back(recursive_simplify(c, cfg));
        current = Expr::make(tree.op(), std::move(children));
    }
    for (int pass = 0; pass < std::max(cfg.max_rewrite_passes, 1); ++pass) {
        Expr next = algebraic_simplify(rationalize_constants(current, cfg), cfg);
        if (next == current) break;
        current = std::move(next);
    }
    return current;
}

CanonicalExpr erc_abstract(Expr const& tree)
{
    auto split = extract_ercs(tree);
    return {std::move(split.tree), std::move(split.params)};
}

CanonicalExpr canonicalize(Expr const& tree, CanonConfig const& cfg)
{
    Expr const simplified = algebraic_simplify(tree, cfg);
    Expr const rationalized = rationalize_constants(simplified, cfg);
    return erc_abstract(recursive_simplify(rationalized, cfg));
}

} // namespace srlab
