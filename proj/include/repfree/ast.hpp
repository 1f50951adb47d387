// Notation-agnostic expression tree shared by the slash and bra-ket
// surface syntaxes. Nodes are immutable and shared; rewrites build new
// trees. Structural equality ignores source spans.
#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace repfree {

struct SourceSpan {
    std::size_t start = 0;  // byte offsets, start <= end
    std::size_t end = 0;
    std::size_t line = 1;
    std::size_t column = 1;
    bool empty() const { return start == 0 && end == 0; }
};

enum class Notation { Slash, Braket };

struct Expr;
struct OpExpr;
struct ScalarExpr;
using ExprPtr = std::shared_ptr<const Expr>;
using OpPtr = std::shared_ptr<const OpExpr>;
using ScalarPtr = std::shared_ptr<const ScalarExpr>;

using cplx_t = std::complex<double>;

// ---- scalar expressions: closed under conjugation and product -------------

struct ScalarLiteral {
    cplx_t value;
};
struct ScalarConj {
    ScalarPtr inner;
};
struct ScalarTimes {
    std::vector<ScalarPtr> factors;
};
// A scalar-valued expression (scalar product or matrix element) used in
// scalar position.
struct ScalarRef {
    ExprPtr expr;
};

struct ScalarExpr {
    std::variant<ScalarLiteral, ScalarConj, ScalarTimes, ScalarRef> node;
};

// ---- operator expressions --------------------------------------------------

struct OpSymbol {
    std::string name;
};
struct OpDagger {
    OpPtr inner;  // dag(dag(X)) stays representable; only the rewriter collapses it
};
struct OpCompose {
    std::vector<OpPtr> factors;  // applied right to left
};
struct OpIdentity {
    std::string basis;  // empty = abstract identity
};
struct OpOuter {  // projection-type operator /ket/ ^ /bra/ . used in operator position
    ExprPtr ket;
    ExprPtr bra;
};

struct OpExpr {
    std::variant<OpSymbol, OpDagger, OpCompose, OpIdentity, OpOuter> node;
};

// ---- expressions ------------------------------------------------------------

enum class Attachment { BoundToState, Delimited };  // c/psi/ vs c ^ /psi/
enum class MEOrigin { BraketChained, SlashDotless };

struct State {
    std::string label;
};
struct Covector {  // /u/ . trailing-dot form, <u| in bra-ket
    ExprPtr inner;  // vector-valued
};
struct OpApply {
    OpPtr op;
    ExprPtr arg;  // vector-valued
};
struct ScalarProduct {
    ExprPtr left;   // vector-valued, anti-linear slot
    ExprPtr right;  // vector-valued, linear slot
};
struct OuterProduct {  // operator-valued: /ket/ ^ /bra/ .
    ExprPtr ket;
    ExprPtr bra;
};
struct Scaled {
    ScalarPtr scalar;
    ExprPtr term;
    Attachment attachment = Attachment::Delimited;
};
struct Sum {
    std::vector<ExprPtr> terms;
};
struct MatrixElement {  // <u|O|v> or the dotless /u/O/v/
    ExprPtr bra;
    OpPtr op;
    ExprPtr ket;
    MEOrigin origin = MEOrigin::BraketChained;
};
// Reduced matrix element /a//O//b/ (bra-ket <a||O||b>): an opaque atom,
// parsed and rendered but carrying no rewrite or numeric semantics.
struct ReducedMatrixElement {
    std::string bra;
    std::string op;
    std::string ket;
};
struct ScalarAtom {  // a naked scalar expression at expression level
    ScalarPtr value;
};
struct OpAtom {  // a naked operator expression at expression level, e.g. dag(A B)
    OpPtr op;
};

struct Expr {
    std::variant<State, Covector, OpApply, ScalarProduct, OuterProduct, Scaled, Sum,
                 MatrixElement, ReducedMatrixElement, ScalarAtom, OpAtom>
        node;
    SourceSpan span;
};

// ---- builders ---------------------------------------------------------------

inline ExprPtr make_expr(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

inline ExprPtr state(std::string label, SourceSpan span = {}) {
    return make_expr({State{std::move(label)}, span});
}
inline ExprPtr covector(ExprPtr inner, SourceSpan span = {}) {
    return make_expr({Covector{std::move(inner)}, span});
}
inline ExprPtr apply(OpPtr op, ExprPtr arg, SourceSpan span = {}) {
    return make_expr({OpApply{std::move(op), std::move(arg)}, span});
}
inline ExprPtr scalar_product(ExprPtr l, ExprPtr r, SourceSpan span = {}) {
    return make_expr({ScalarProduct{std::move(l), std::move(r)}, span});
}
inline ExprPtr outer(ExprPtr ket, ExprPtr bra, SourceSpan span = {}) {
    return make_expr({OuterProduct{std::move(ket), std::move(bra)}, span});
}
inline ExprPtr scaled(ScalarPtr s, ExprPtr t, Attachment a, SourceSpan span = {}) {
    return make_expr({Scaled{std::move(s), std::move(t), a}, span});
}
inline ExprPtr sum(std::vector<ExprPtr> terms, SourceSpan span = {}) {
    return make_expr({Sum{std::move(terms)}, span});
}
inline ExprPtr matrix_element(ExprPtr bra, OpPtr op, ExprPtr ket, MEOrigin origin,
                              SourceSpan span = {}) {
    return make_expr({MatrixElement{std::move(bra), std::move(op), std::move(ket), origin}, span});
}
inline ExprPtr reduced_me(std::string bra, std::string op, std::string ket, SourceSpan span = {}) {
    return make_expr({ReducedMatrixElement{std::move(bra), std::move(op), std::move(ket)}, span});
}
inline ExprPtr scalar_atom(ScalarPtr s, SourceSpan span = {}) {
    return make_expr({ScalarAtom{std::move(s)}, span});
}
inline ExprPtr op_atom(OpPtr op, SourceSpan span = {}) {
    return make_expr({OpAtom{std::move(op)}, span});
}

inline OpPtr make_op(OpExpr o) { return std::make_shared<const OpExpr>(std::move(o)); }
inline OpPtr op_symbol(std::string name) { return make_op({OpSymbol{std::move(name)}}); }
inline OpPtr op_dagger(OpPtr inner) { return make_op({OpDagger{std::move(inner)}}); }
inline OpPtr op_compose(std::vector<OpPtr> fs) {
    if (fs.size() == 1) return fs.front();
    return make_op({OpCompose{std::move(fs)}});
}
inline OpPtr op_identity(std::string basis = "") { return make_op({OpIdentity{std::move(basis)}}); }
inline OpPtr op_outer(ExprPtr ket, ExprPtr bra) {
    return make_op({OpOuter{std::move(ket), std::move(bra)}});
}

inline ScalarPtr make_scalar(ScalarExpr s) { return std::make_shared<const ScalarExpr>(std::move(s)); }
inline ScalarPtr lit(cplx_t v) { return make_scalar({ScalarLiteral{v}}); }
inline ScalarPtr conj_scalar(ScalarPtr s) { return make_scalar({ScalarConj{std::move(s)}}); }
inline ScalarPtr times(std::vector<ScalarPtr> fs) {
    if (fs.size() == 1) return fs.front();
    return make_scalar({ScalarTimes{std::move(fs)}});
}
inline ScalarPtr scalar_ref(ExprPtr e) { return make_scalar({ScalarRef{std::move(e)}}); }

// ---- structural equality (spans ignored) ------------------------------------

bool equal(const ExprPtr& a, const ExprPtr& b);
bool equal(const OpPtr& a, const OpPtr& b);
bool equal(const ScalarPtr& a, const ScalarPtr& b);

inline bool equal(const ScalarPtr& a, const ScalarPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->node.index() != b->node.index()) return false;
    if (auto* x = std::get_if<ScalarLiteral>(&a->node))
        return x->value == std::get<ScalarLiteral>(b->node).value;
    if (auto* x = std::get_if<ScalarConj>(&a->node))
        return equal(x->inner, std::get<ScalarConj>(b->node).inner);
    if (auto* x = std::get_if<ScalarTimes>(&a->node)) {
        const auto& y = std::get<ScalarTimes>(b->node);
        if (x->factors.size() != y.factors.size()) return false;
        for (std::size_t i = 0; i < x->factors.size(); ++i)
            if (!equal(x->factors[i], y.factors[i])) return false;
        return true;
    }
    return equal(std::get<ScalarRef>(a->node).expr, std::get<ScalarRef>(b->node).expr);
}

inline bool equal(const OpPtr& a, const OpPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->node.index() != b->node.index()) return false;
    if (auto* x = std::get_if<OpSymbol>(&a->node))
        return x->name == std::get<OpSymbol>(b->node).name;
    if (auto* x = std::get_if<OpDagger>(&a->node))
        return equal(x->inner, std::get<OpDagger>(b->node).inner);
    if (auto* x = std::get_if<OpCompose>(&a->node)) {
        const auto& y = std::get<OpCompose>(b->node);
        if (x->factors.size() != y.factors.size()) return false;
        for (std::size_t i = 0; i < x->factors.size(); ++i)
            if (!equal(x->factors[i], y.factors[i])) return false;
        return true;
    }
    if (auto* x = std::get_if<OpIdentity>(&a->node))
        return x->basis == std::get<OpIdentity>(b->node).basis;
    const auto& x = std::get<OpOuter>(a->node);
    const auto& y = std::get<OpOuter>(b->node);
    return equal(x.ket, y.ket) && equal(x.bra, y.bra);
}

inline bool equal(const ExprPtr& a, const ExprPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->node.index() != b->node.index()) return false;
    if (auto* x = std::get_if<State>(&a->node)) return x->label == std::get<State>(b->node).label;
    if (auto* x = std::get_if<Covector>(&a->node))
        return equal(x->inner, std::get<Covector>(b->node).inner);
    if (auto* x = std::get_if<OpApply>(&a->node)) {
        const auto& y = std::get<OpApply>(b->node);
        return equal(x->op, y.op) && equal(x->arg, y.arg);
    }
    if (auto* x = std::get_if<ScalarProduct>(&a->node)) {
        const auto& y = std::get<ScalarProduct>(b->node);
        return equal(x->left, y.left) && equal(x->right, y.right);
    }
    if (auto* x = std::get_if<OuterProduct>(&a->node)) {
        const auto& y = std::get<OuterProduct>(b->node);
        return equal(x->ket, y.ket) && equal(x->bra, y.bra);
    }
    if (auto* x = std::get_if<Scaled>(&a->node)) {
        const auto& y = std::get<Scaled>(b->node);
        return x->attachment == y.attachment && equal(x->scalar, y.scalar) && equal(x->term, y.term);
    }
    if (auto* x = std::get_if<Sum>(&a->node)) {
        const auto& y = std::get<Sum>(b->node);
        if (x->terms.size() != y.terms.size()) return false;
        for (std::size_t i = 0; i < x->terms.size(); ++i)
            if (!equal(x->terms[i], y.terms[i])) return false;
        return true;
    }
    if (auto* x = std::get_if<MatrixElement>(&a->node)) {
        const auto& y = std::get<MatrixElement>(b->node);
        return x->origin == y.origin && equal(x->bra, y.bra) && equal(x->op, y.op) &&
               equal(x->ket, y.ket);
    }
    if (auto* x = std::get_if<ReducedMatrixElement>(&a->node)) {
        const auto& y = std::get<ReducedMatrixElement>(b->node);
        return x->bra == y.bra && x->op == y.op && x->ket == y.ket;
    }
    if (auto* x = std::get_if<ScalarAtom>(&a->node))
        return equal(x->value, std::get<ScalarAtom>(b->node).value);
    return equal(std::get<OpAtom>(a->node).op, std::get<OpAtom>(b->node).op);
}

// ---- valence ----------------------------------------------------------------

enum class Valence { Vector, CovectorV, Operator, Scalar };

inline Valence valence(const ExprPtr& e) {
    if (std::holds_alternative<State>(e->node)) return Valence::Vector;
    if (std::holds_alternative<Covector>(e->node)) return Valence::CovectorV;
    if (std::holds_alternative<OpApply>(e->node)) return Valence::Vector;
    if (std::holds_alternative<ScalarProduct>(e->node)) return Valence::Scalar;
    if (std::holds_alternative<OuterProduct>(e->node)) return Valence::Operator;
    if (auto* s = std::get_if<Scaled>(&e->node)) return valence(s->term);
    if (auto* s = std::get_if<Sum>(&e->node))
        return s->terms.empty() ? Valence::Scalar : valence(s->terms.front());
    if (std::holds_alternative<MatrixElement>(e->node)) return Valence::Scalar;
    if (std::holds_alternative<ReducedMatrixElement>(e->node)) return Valence::Scalar;
    if (std::holds_alternative<ScalarAtom>(e->node)) return Valence::Scalar;
    return Valence::Operator;  // OpAtom
}

}  // namespace repfree
