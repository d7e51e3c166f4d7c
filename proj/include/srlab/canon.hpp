#ifndef SRLAB_CANON_HPP
#define SRLAB_CANON_HPP

#include <cstddef>

#include "srlab/expr.hpp"

namespace srlab {

struct CanonConfig {
    int precision = 15;            // significant digits kept on constants
    int max_rewrite_passes = 8;    // per sub-expression fixed-point iterations
};

// Canonical tree has erc leaves in preorder; values holds the constants they
// replaced so substitute_params(tree, values) is the simplified expression.
struct CanonicalExpr {
    Expr tree;
    ParamVector values;
};

// Rewrites to a normal form: n-ary sums of monomials with folded constants,
// collected like terms, merged integer powers, sign normalization of odd/even
// functions, and sqrt(u^2) -> abs(u). Products of sums stay factored. Emits
// left-deep binary add/mul with constants first and a single div for negative
// powers. Input must not contain erc leaves.
Expr algebraic_simplify(Expr const& tree, CanonConfig const& cfg = {});

// Rounds a constant to `precision` significant digits, snapping to p/q with
// q <= 100 when that rational agrees at that precision. Magnitudes at or
// below 10^-precision become zero.
double rationalize_value(double v, int precision);
Expr rationalize_constants(Expr const& tree, CanonConfig const& cfg = {});

// Bottom-up: every sub-expression is rebuilt from simplified children and
// then rationalized and simplified until stable.
Expr recursive_simplify(Expr const& tree, CanonConfig const& cfg = {});

// Replaces const leaves with erc slots in preorder.
CanonicalExpr erc_abstract(Expr const& tree);

// algebraic_simplify -> rationalize_constants -> recursive_simplify -> erc_abstract.
CanonicalExpr canonicalize(Expr const& tree, CanonConfig const& cfg = {});

} // namespace srlab

#endif
