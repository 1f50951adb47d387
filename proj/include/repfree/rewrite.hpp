// Semantics-preserving symbolic transformations: canonical simplification,
// notation conversion, adjoint distribution, identity-resolution insertion
// and linearity expansion. All transformations are pure; traces carry
// whole-expression before/after snapshots so replaying the steps from the
// initial expression reproduces the final one.
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ast.hpp"
#include "model.hpp"
#include "render.hpp"

namespace repfree {

struct RewriteStep {
    std::string rule;
    ExprPtr before;  // whole expression before the step
    ExprPtr after;   // whole expression after the step
    std::string note;
};

struct RewriteTrace {
    std::vector<RewriteStep> steps;
};

// Numbered step list, one rule per line, renderable in either notation.
std::string trace_lines(const RewriteTrace& t, Notation n = Notation::Slash);

namespace rewrite_detail {

inline ScalarPtr conj_fold(const ScalarPtr& s) {
    if (auto* l = std::get_if<ScalarLiteral>(&s->node)) return lit(std::conj(l->value));
    if (auto* c = std::get_if<ScalarConj>(&s->node)) return c->inner;
    return conj_scalar(s);
}

inline ScalarPtr times_fold(const ScalarPtr& a, const ScalarPtr& b) {
    auto* la = std::get_if<ScalarLiteral>(&a->node);
    auto* lb = std::get_if<ScalarLiteral>(&b->node);
    if (la && lb) return lit(la->value * lb->value);
    std::vector<ScalarPtr> fs;
    auto push = [&](const ScalarPtr& s) {
        if (auto* t = std::get_if<ScalarTimes>(&s->node))
            fs.insert(fs.end(), t->factors.begin(), t->factors.end());
        else
            fs.push_back(s);
    };
    push(a);
    push(b);
    return times(std::move(fs));
}

// Scalar-level folding: conj(conj(x)) = x, conj of a literal, flattening
// and literal-merging of products.
inline ScalarPtr fold_scalar(const ScalarPtr& s, bool& changed) {
    if (auto* c = std::get_if<ScalarConj>(&s->node)) {
        ScalarPtr inner = fold_scalar(c->inner, changed);
        if (auto* l = std::get_if<ScalarLiteral>(&inner->node)) {
            changed = true;
            return lit(std::conj(l->value));
        }
        if (auto* cc = std::get_if<ScalarConj>(&inner->node)) {
            changed = true;
            return cc->inner;
        }
        return inner == c->inner ? s : conj_scalar(inner);
    }
    if (auto* t = std::get_if<ScalarTimes>(&s->node)) {
        std::vector<ScalarPtr> fs;
        cplx_t lit_acc(1.0, 0.0);
        std::size_t lit_count = 0;
        bool local = false;
        for (const auto& f : t->factors) {
            ScalarPtr g = fold_scalar(f, local);
            if (auto* tt = std::get_if<ScalarTimes>(&g->node)) {
                local = true;
                for (const auto& h : tt->factors) fs.push_back(h);
            } else {
                fs.push_back(g);
            }
        }
        std::vector<ScalarPtr> out;
        for (const auto& f : fs) {
            if (auto* l = std::get_if<ScalarLiteral>(&f->node)) {
                lit_acc *= l->value;
                ++lit_count;
            } else {
                out.push_back(f);
            }
        }
        if (lit_count > 1 || (lit_count == 1 && !out.empty() &&
                              !std::holds_alternative<ScalarLiteral>(t->factors.front()->node))) {
            local = true;
        }
        if (lit_count > 0 && lit_count == t->factors.size() && !local) return s;
        if (out.empty()) {
            if (lit_count == 0) return s;
            changed = true;
            return lit(lit_acc);
        }
        if (lit_count > 0) out.insert(out.begin(), lit(lit_acc));
        if (!local && out.size() == t->factors.size()) return s;
        changed = true;
        return times(std::move(out));
    }
    return s;
}

struct Rewritten {
    ExprPtr expr;
    std::string rule;
    std::string note;
};

// One innermost-leftmost rewrite, or nullopt at normal form. A fixed
// application order stands in for a confluence proof; the idempotence
// property test guards regressions.
inline std::optional<Rewritten> rewrite_once(const ExprPtr& e);

inline std::optional<Rewritten> rewrite_child(const ExprPtr& e) {
    auto rebuild = [&](const ExprPtr& child, const ExprPtr& replacement) {
        // rebuild e with `child` swapped for `replacement`
        Expr copy = *e;
        if (auto* c = std::get_if<Covector>(&copy.node)) {
            c->inner = replacement;
        } else if (auto* a = std::get_if<OpApply>(&copy.node)) {
            a->arg = replacement;
        } else if (auto* sp = std::get_if<ScalarProduct>(&copy.node)) {
            if (sp->left == child) sp->left = replacement;
            else sp->right = replacement;
        } else if (auto* o = std::get_if<OuterProduct>(&copy.node)) {
            if (o->ket == child) o->ket = replacement;
            else o->bra = replacement;
        } else if (auto* sc = std::get_if<Scaled>(&copy.node)) {
            sc->term = replacement;
        } else if (auto* su = std::get_if<Sum>(&copy.node)) {
            for (auto& t : su->terms)
                if (t == child) {
                    t = replacement;
                    break;
                }
        } else if (auto* me = std::get_if<MatrixElement>(&copy.node)) {
            if (me->bra == child) me->bra = replacement;
            else me->ket = replacement;
        }
        return make_expr(std::move(copy));
    };

    std::vector<ExprPtr> children;
    if (auto* c = std::get_if<Covector>(&e->node)) children = {c->inner};
    else if (auto* a = std::get_if<OpApply>(&e->node)) children = {a->arg};
    else if (auto* sp = std::get_if<ScalarProduct>(&e->node)) children = {sp->left, sp->right};
    else if (auto* o = std::get_if<OuterProduct>(&e->node)) children = {o->ket, o->bra};
    else if (auto* sc = std::get_if<Scaled>(&e->node)) children = {sc->term};
    else if (auto* su = std::get_if<Sum>(&e->node)) children = su->terms;
    else if (auto* me = std::get_if<MatrixElement>(&e->node)) children = {me->bra, me->ket};

    for (const auto& child : children) {
        if (auto r = rewrite_once(child)) {
            return Rewritten{rebuild(child, r->expr), r->rule, r->note};
        }
    }

    // scalar payloads: fold and recurse into scalar-product references
    auto scalar_slot = [&](const ScalarPtr& s) -> std::optional<std::pair<ScalarPtr, Rewritten>> {
        bool changed = false;
        ScalarPtr folded = fold_scalar(s, changed);
        if (changed) return std::make_pair(folded, Rewritten{nullptr, "scalar-fold", ""});
        if (auto* r = std::get_if<ScalarRef>(&s->node)) {
            if (auto rr = rewrite_once(r->expr))
                return std::make_pair(scalar_ref(rr->expr), Rewritten{nullptr, rr->rule, rr->note});
        }
        if (auto* c = std::get_if<ScalarConj>(&s->node)) {
            if (auto* r = std::get_if<ScalarRef>(&c->inner->node)) {
                if (auto rr = rewrite_once(r->expr))
                    return std::make_pair(conj_scalar(scalar_ref(rr->expr)),
                                          Rewritten{nullptr, rr->rule, rr->note});
            }
        }
        return std::nullopt;
    };
    if (auto* sc = std::get_if<Scaled>(&e->node)) {
        if (auto hit = scalar_slot(sc->scalar)) {
            Expr copy = *e;
            std::get<Scaled>(copy.node).scalar = hit->first;
            return Rewritten{make_expr(std::move(copy)), hit->second.rule, hit->second.note};
        }
    }
    if (auto* sa = std::get_if<ScalarAtom>(&e->node)) {
        if (auto hit = scalar_slot(sa->value)) {
            Expr copy = *e;
            std::get<ScalarAtom>(copy.node).value = hit->first;
            return Rewritten{make_expr(std::move(copy)), hit->second.rule, hit->second.note};
        }
    }
    return std::nullopt;
}

inline std::optional<Rewritten> rewrite_once(const ExprPtr& e) {
    if (auto r = rewrite_child(e)) return r;

    // outer product applied to a vector collapses to a scaled ket
    if (auto* a = std::get_if<OpApply>(&e->node)) {
        if (auto* oo = std::get_if<OpOuter>(&a->op->node)) {
            return Rewritten{scaled(scalar_ref(scalar_product(oo->bra, a->arg)), oo->ket,
                                    Attachment::Delimited),
                             "outer-apply-collapse", ""};
        }
    }
    // constants move leftward out of projection-type operators
    if (auto* o = std::get_if<OuterProduct>(&e->node)) {
        if (auto* k = std::get_if<Scaled>(&o->ket->node)) {
            return Rewritten{scaled(k->scalar, outer(k->term, o->bra), Attachment::Delimited),
                             "constant-extraction", ""};
        }
        if (auto* b = std::get_if<Scaled>(&o->bra->node)) {
            return Rewritten{scaled(conj_fold(b->scalar), outer(o->ket, b->term),
                                    Attachment::Delimited),
                             "constant-extraction", ""};
        }
    }
    // c/psi/ . /xi/ = conj(c) ^ /psi/ . /xi/ and the linear right-slot twin
    if (auto* sp = std::get_if<ScalarProduct>(&e->node)) {
        if (auto* l = std::get_if<Scaled>(&sp->left->node)) {
            if (l->attachment == Attachment::BoundToState)
                return Rewritten{scaled(conj_fold(l->scalar),
                                        scalar_product(l->term, sp->right), Attachment::Delimited),
                                 "attachment-normalization", ""};
        }
        if (auto* r = std::get_if<Scaled>(&sp->right->node)) {
            if (r->attachment == Attachment::BoundToState)
                return Rewritten{scaled(r->scalar, scalar_product(sp->left, r->term),
                                        Attachment::Delimited),
                                 "attachment-normalization", ""};
        }
    }
    if (auto* sc = std::get_if<Scaled>(&e->node)) {
        if (auto* inner = std::get_if<Scaled>(&sc->term->node)) {
            if (inner->attachment == sc->attachment)
                return Rewritten{scaled(times_fold(sc->scalar, inner->scalar), inner->term,
                                        sc->attachment),
                                 "scaled-flattening", ""};
        }
    }
    if (auto* su = std::get_if<Sum>(&e->node)) {
        bool nested = false;
        for (const auto& t : su->terms)
            if (std::holds_alternative<Sum>(t->node)) nested = true;
        if (nested || su->terms.size() == 1) {
            std::vector<ExprPtr> flat;
            for (const auto& t : su->terms) {
                if (auto* ts = std::get_if<Sum>(&t->node))
                    flat.insert(flat.end(), ts->terms.begin(), ts->terms.end());
                else
                    flat.push_back(t);
            }
            if (flat.size() == 1) return Rewritten{flat.front(), "sum-flattening", ""};
            return Rewritten{sum(std::move(flat)), "sum-flattening", ""};
        }
    }
    // the dotless matrix element is display sugar for the dotted form
    if (auto* me = std::get_if<MatrixElement>(&e->node)) {
        if (me->origin == MEOrigin::SlashDotless)
            return Rewritten{scalar_product(me->bra, apply(me->op, me->ket)), "dotless-desugar",
                             ""};
    }
    return std::nullopt;
}

// Canonicalizes conjugate-symmetric pairs: when both /u/ . /v/ and
// /v/ . /u/ occur in one expression, later reversed occurrences become
// conj(first orientation). A single orientation is left as written.
inline ExprPtr conj_symmetry_pass(const ExprPtr& e, std::vector<std::pair<std::string, std::string>>& seen,
                                  bool& changed) {
    if (auto* sp = std::get_if<ScalarProduct>(&e->node)) {
        std::string l = render_slash(sp->left), r = render_slash(sp->right);
        if (l != r) {
            for (const auto& [sl, sr] : seen) {
                if (sl == r && sr == l) {
                    changed = true;
                    return scalar_atom(conj_scalar(
                        scalar_ref(scalar_product(sp->right, sp->left))));
                }
            }
        }
        seen.emplace_back(l, r);
        return e;
    }
    Expr copy = *e;
    bool local = false;
    auto rec = [&](const ExprPtr& c) { return conj_symmetry_pass(c, seen, local); };
    if (auto* c = std::get_if<Covector>(&copy.node)) c->inner = rec(c->inner);
    else if (auto* a = std::get_if<OpApply>(&copy.node)) a->arg = rec(a->arg);
    else if (auto* o = std::get_if<OuterProduct>(&copy.node)) {
        o->ket = rec(o->ket);
        o->bra = rec(o->bra);
    } else if (auto* sc = std::get_if<Scaled>(&copy.node)) {
        if (auto* ref = std::get_if<ScalarRef>(&sc->scalar->node)) {
            ExprPtr inner = rec(ref->expr);
            if (inner != ref->expr) sc->scalar = scalar_ref(inner);
        }
        sc->term = rec(sc->term);
    } else if (auto* su = std::get_if<Sum>(&copy.node)) {
        for (auto& t : su->terms) t = rec(t);
    }
    if (!local) return e;
    changed = true;
    return make_expr(std::move(copy));
}

}  // namespace rewrite_detail

struct SimplifyResult {
    ExprPtr expr;
    RewriteTrace trace;
};

inline SimplifyResult simplify(const ExprPtr& e) {
    SimplifyResult out{e, {}};
    for (int guard = 0; guard < 100000; ++guard) {
        auto r = rewrite_detail::rewrite_once(out.expr);
        if (!r) break;
        out.trace.steps.push_back({r->rule, out.expr, r->expr, r->note});
        out.expr = r->expr;
    }
    std::vector<std::pair<std::string, std::string>> seen;
    bool changed = false;
    ExprPtr canon = rewrite_detail::conj_symmetry_pass(out.expr, seen, changed);
    if (changed) {
        out.trace.steps.push_back({"conjugate-symmetry", out.expr, canon, ""});
        out.expr = canon;
    }
    return out;
}

// ---- adjoint ---------------------------------------------------------------

namespace rewrite_detail {

inline OpPtr adjoint_op(const OpPtr& op, std::string& note) {
    if (std::holds_alternative<OpSymbol>(op->node)) return op_dagger(op);
    if (auto* d = std::get_if<OpDagger>(&op->node)) {
        note = "dag(dag(X)) collapsed to X: symbolic involution assumes the operator admits it";
        return d->inner;
    }
    if (auto* c = std::get_if<OpCompose>(&op->node)) {
        std::vector<OpPtr> fs;
        for (auto it = c->factors.rbegin(); it != c->factors.rend(); ++it)
            fs.push_back(adjoint_op(*it, note));
        return op_compose(std::move(fs));
    }
    if (std::holds_alternative<OpIdentity>(op->node)) return op;
    const auto& o = std::get<OpOuter>(op->node);
    return op_outer(o.bra, o.ket);
}

inline ExprPtr adjoint_expr_impl(const ExprPtr& e, std::string& note) {
    if (auto* o = std::get_if<OuterProduct>(&e->node)) return outer(o->bra, o->ket);
    if (auto* sc = std::get_if<Scaled>(&e->node))
        return scaled(conj_fold(sc->scalar), adjoint_expr_impl(sc->term, note), sc->attachment);
    if (auto* su = std::get_if<Sum>(&e->node)) {
        std::vector<ExprPtr> terms;
        for (const auto& t : su->terms) terms.push_back(adjoint_expr_impl(t, note));
        return sum(std::move(terms));
    }
    if (auto* oa = std::get_if<OpAtom>(&e->node)) return op_atom(adjoint_op(oa->op, note));
    throw std::invalid_argument("adjoint needs an operator-valued expression");
}

}  // namespace rewrite_detail

// Dagger pushed inward: dag(A B) = dag(B) dag(A), dag(/u/ ^ /v/ .) =
// /v/ ^ /u/ ., dag(c ^ O) = conj(c) ^ dag(O); dag(dag(X)) collapses with a
// trace note recording the closure assumption.
inline ExprPtr adjoint(const ExprPtr& e, RewriteTrace* trace = nullptr) {
    std::string note;
    ExprPtr after = rewrite_detail::adjoint_expr_impl(e, note);
    if (trace) trace->steps.push_back({"adjoint", e, after, note});
    return after;
}

// ---- identity insertion ------------------------------------------------------

struct InsertSite {
    enum class Kind { AtDot, AroundOpArg, BothSides } kind = Kind::AtDot;
    std::size_t index = 0;  // which scalar product, in leftmost-innermost order
};

namespace rewrite_detail {

inline ExprPtr insert_at(const ExprPtr& e, const std::string& basis, InsertSite site,
                         const HilbertModel* model, std::size_t& counter, bool& done);

inline ExprPtr expand_sp(const ScalarProduct& sp, const std::string& basis, InsertSite::Kind kind,
                         const HilbertModel* model) {
    const bool declared = model && model->bases.count(basis) && !model->truncated();
    if (kind == InsertSite::Kind::AtDot) {
        if (!declared)
            return scalar_product(sp.left, apply(op_identity(basis), sp.right));
        std::vector<ExprPtr> terms;
        for (const auto& n : model->bases.at(basis).states)
            terms.push_back(scaled(scalar_ref(scalar_product(state(n), sp.right)),
                                   scalar_product(sp.left, state(n)), Attachment::Delimited));
        return sum(std::move(terms));
    }
    auto* app = std::get_if<OpApply>(&sp.right->node);
    if (!app) throw std::invalid_argument("site does not address an operator application");
    if (kind == InsertSite::Kind::AroundOpArg) {
        if (!declared)
            return scalar_product(sp.left,
                                  apply(op_compose({app->op, op_identity(basis)}), app->arg));
        std::vector<ExprPtr> terms;
        for (const auto& n : model->bases.at(basis).states)
            terms.push_back(scaled(scalar_ref(scalar_product(state(n), app->arg)),
                                   scalar_product(sp.left, apply(app->op, state(n))),
                                   Attachment::Delimited));
        return sum(std::move(terms));
    }
    // BothSides: /u/ . I O I /v/ expanded over pairs (m, n)
    if (!declared)
        return scalar_product(
            sp.left, apply(op_compose({op_identity(basis), app->op, op_identity(basis)}), app->arg));
    std::vector<ExprPtr> terms;
    for (const auto& mlab : model->bases.at(basis).states)
        for (const auto& nlab : model->bases.at(basis).states)
            terms.push_back(scaled(
                scalar_ref(scalar_product(state(nlab), app->arg)),
                scaled(scalar_ref(scalar_product(state(mlab), apply(app->op, state(nlab)))),
                       scalar_product(sp.left, state(mlab)), Attachment::Delimited),
                Attachment::Delimited));
    return sum(std::move(terms));
}

inline ExprPtr insert_at(const ExprPtr& e, const std::string& basis, InsertSite site,
                         const HilbertModel* model, std::size_t& counter, bool& done) {
    if (done) return e;
    Expr copy = *e;
    auto rec = [&](ExprPtr c) { return insert_at(c, basis, site, model, counter, done); };
    if (auto* c = std::get_if<Covector>(&copy.node)) c->inner = rec(c->inner);
    else if (auto* a = std::get_if<OpApply>(&copy.node)) a->arg = rec(a->arg);
    else if (auto* sp = std::get_if<ScalarProduct>(&copy.node)) {
        sp->left = rec(sp->left);
        sp->right = rec(sp->right);
        if (!done && counter++ == site.index) {
            done = true;
            return expand_sp(*sp, basis, site.kind, model);
        }
    } else if (auto* o = std::get_if<OuterProduct>(&copy.node)) {
        o->ket = rec(o->ket);
        o->bra = rec(o->bra);
    } else if (auto* sc = std::get_if<Scaled>(&copy.node)) {
        if (auto* ref = std::get_if<ScalarRef>(&sc->scalar->node)) {
            ExprPtr inner = rec(ref->expr);
            if (inner != ref->expr) sc->scalar = scalar_ref(inner);
        }
        sc->term = rec(sc->term);
    } else if (auto* su = std::get_if<Sum>(&copy.node)) {
        for (auto& t : su->terms) t = rec(t);
    }
    return make_expr(std::move(copy));
}

}  // namespace rewrite_detail

// Replaces the addressed scalar product by its resolution-of-identity
// expansion over a declared orthonormal basis; with no model (or an
// undeclared basis) the insertion stays symbolic as an I[basis] factor.
inline ExprPtr insert_identity(const ExprPtr& e, const std::string& basis, InsertSite site,
                               const HilbertModel* model = nullptr) {
    std::size_t counter = 0;
    bool done = false;
    ExprPtr out = rewrite_detail::insert_at(e, basis, site, model, counter, done);
    if (!done) throw std::invalid_argument("invalid site: no matching scalar product");
    return out;
}

// ---- notation conversion -----------------------------------------------------

struct ConvertResult {
    ExprPtr expr;
    RewriteTrace trace;
    std::vector<std::string> notes;
    std::optional<std::string> unrepresentable;
};

namespace rewrite_detail {

inline OpPtr collapse_double_dagger(const OpPtr& op, bool& changed) {
    if (auto* d = std::get_if<OpDagger>(&op->node)) {
        OpPtr inner = collapse_double_dagger(d->inner, changed);
        if (auto* dd = std::get_if<OpDagger>(&inner->node)) {
            changed = true;
            return dd->inner;
        }
        return inner == d->inner ? op : op_dagger(inner);
    }
    if (auto* c = std::get_if<OpCompose>(&op->node)) {
        std::vector<OpPtr> fs;
        bool local = false;
        for (const auto& f : c->factors) fs.push_back(collapse_double_dagger(f, local));
        if (!local) return op;
        changed = true;
        return op_compose(std::move(fs));
    }
    return op;
}

// Rebuild the tree toward one notation's idiomatic structure.
inline ExprPtr to_notation(const ExprPtr& e, Notation target, const LinearityOracle& oracle,
                           std::vector<std::string>& notes, bool& changed) {
    auto rec = [&](const ExprPtr& c) { return to_notation(c, target, oracle, notes, changed); };
    if (auto* sp = std::get_if<ScalarProduct>(&e->node)) {
        ExprPtr left = rec(sp->left);
        ExprPtr right = rec(sp->right);
        if (target == Notation::Braket) {
            // /psi/ . O/xi/ => <psi|O|xi> (chained form is the bra-ket idiom;
            // the checker, not the converter, owns validity)
            if (std::holds_alternative<State>(left->node)) {
                if (auto* a = std::get_if<OpApply>(&right->node)) {
                    if (std::holds_alternative<State>(a->arg->node) &&
                        !chain_antilinear(a->op, oracle)) {
                        changed = true;
                        notes.push_back(
                            "chained bra-ket form is conditional on the domain memberships");
                        return matrix_element(left, a->op, a->arg, MEOrigin::BraketChained);
                    }
                    if (chain_antilinear(a->op, oracle))
                        notes.push_back("anti-linear operator kept in action form");
                }
            }
            // O/u/ . /v/ keeps its bra-action form (<u|dag(O))|v>: only the
            // right-action correspondence produces the chained idiom.
        }
        if (left != sp->left || right != sp->right) {
            changed = true;
            return scalar_product(left, right);
        }
        return e;
    }
    if (auto* me = std::get_if<MatrixElement>(&e->node)) {
        if (target == Notation::Slash) {
            // <psi|O|xi> => /psi/ . O/xi/
            changed = true;
            return scalar_product(rec(me->bra), apply(me->op, rec(me->ket)));
        }
        if (me->origin == MEOrigin::SlashDotless) {
            changed = true;
            return matrix_element(rec(me->bra), me->op, rec(me->ket), MEOrigin::BraketChained);
        }
        return e;
    }
    if (auto* c = std::get_if<Covector>(&e->node)) {
        ExprPtr inner = rec(c->inner);
        if (auto* a = std::get_if<OpApply>(&inner->node)) {
            bool collapsed = false;
            OpPtr ch = collapse_double_dagger(a->op, collapsed);
            if (collapsed) {
                changed = true;
                notes.push_back(
                    "dag(dag(X)) collapsed to X: symbolic involution assumes the operator admits it");
                return covector(apply(ch, a->arg));
            }
        }
        if (inner != c->inner) {
            changed = true;
            return covector(inner);
        }
        return e;
    }
    // structural recursion
    Expr copy = *e;
    bool local = false;
    auto rec2 = [&](const ExprPtr& c) {
        ExprPtr r = to_notation(c, target, oracle, notes, local);
        return r;
    };
    if (auto* a = std::get_if<OpApply>(&copy.node)) a->arg = rec2(a->arg);
    else if (auto* o = std::get_if<OuterProduct>(&copy.node)) {
        o->ket = rec2(o->ket);
        o->bra = rec2(o->bra);
    } else if (auto* sc = std::get_if<Scaled>(&copy.node)) {
        if (auto* ref = std::get_if<ScalarRef>(&sc->scalar->node)) {
            ExprPtr inner = rec2(ref->expr);
            if (inner != ref->expr) sc->scalar = scalar_ref(inner);
        }
        sc->term = rec2(sc->term);
    } else if (auto* su = std::get_if<Sum>(&copy.node)) {
        for (auto& t : su->terms) t = rec2(t);
    } else if (auto* sa = std::get_if<ScalarAtom>(&copy.node)) {
        if (auto* ref = std::get_if<ScalarRef>(&sa->value->node)) {
            ExprPtr inner = rec2(ref->expr);
            if (inner != ref->expr) sa->value = scalar_ref(inner);
        } else if (auto* cj = std::get_if<ScalarConj>(&sa->value->node)) {
            if (auto* ref = std::get_if<ScalarRef>(&cj->inner->node)) {
                ExprPtr inner = rec2(ref->expr);
                if (inner != ref->expr) sa->value = conj_scalar(scalar_ref(inner));
            }
        }
    }
    if (!local) return e;
    changed = true;
    return make_expr(std::move(copy));
}

}  // namespace rewrite_detail

// Applies the notation correspondence (|psi> <=> /psi/, <psi| <=> /psi/ .,
// <psi|O <=> dag(O)/psi/ ., <psi|O|xi> <=> /psi/ . O/xi/). The result is
// simplify-normal; structure that the target cannot express chained stays
// in parenthesized action form, and the unrepresentable field reports
// constructs with no bra-ket form at all.
inline ConvertResult convert(const ExprPtr& e, Notation target, const LinearityOracle& oracle = {}) {
    ConvertResult out;
    SimplifyResult s = simplify(e);
    out.trace = std::move(s.trace);
    bool changed = false;
    ExprPtr converted = rewrite_detail::to_notation(s.expr, target, oracle, out.notes, changed);
    if (changed)
        out.trace.steps.push_back({target == Notation::Braket ? "to-braket" : "to-slash", s.expr,
                                   converted, ""});
    out.expr = converted;
    if (target == Notation::Braket) {
        RenderResult r = render_braket(out.expr, oracle);
        if (!r.ok()) out.unrepresentable = r.unrepresentable;
    }
    // drop duplicate notes
    std::vector<std::string> uniq;
    for (auto& n : out.notes)
        if (std::find(uniq.begin(), uniq.end(), n) == uniq.end()) uniq.push_back(n);
    out.notes = std::move(uniq);
    return out;
}

// ---- linearity expansion -------------------------------------------------------

namespace rewrite_detail {

inline ExprPtr expand_linear_once(const ExprPtr& e, const LinearityOracle& oracle, bool& changed);

inline ExprPtr expand_children(const ExprPtr& e, const LinearityOracle& oracle, bool& changed) {
    Expr copy = *e;
    bool local = false;
    auto rec = [&](const ExprPtr& c) { return expand_linear_once(c, oracle, local); };
    if (auto* c = std::get_if<Covector>(&copy.node)) c->inner = rec(c->inner);
    else if (auto* a = std::get_if<OpApply>(&copy.node)) a->arg = rec(a->arg);
    else if (auto* sp = std::get_if<ScalarProduct>(&copy.node)) {
        sp->left = rec(sp->left);
        sp->right = rec(sp->right);
    } else if (auto* o = std::get_if<OuterProduct>(&copy.node)) {
        o->ket = rec(o->ket);
        o->bra = rec(o->bra);
    } else if (auto* sc = std::get_if<Scaled>(&copy.node)) {
        if (auto* ref = std::get_if<ScalarRef>(&sc->scalar->node)) {
            ExprPtr inner = rec(ref->expr);
            if (inner != ref->expr) sc->scalar = scalar_ref(inner);
        }
        sc->term = rec(sc->term);
    } else if (auto* su = std::get_if<Sum>(&copy.node)) {
        for (auto& t : su->terms) t = rec(t);
    } else if (auto* me = std::get_if<MatrixElement>(&copy.node)) {
        me->bra = rec(me->bra);
        me->ket = rec(me->ket);
    }
    if (!local) return e;
    changed = true;
    return make_expr(std::move(copy));
}

inline ExprPtr expand_linear_once(const ExprPtr& e, const LinearityOracle& oracle, bool& changed) {
    ExprPtr cur = expand_children(e, oracle, changed);
    if (auto* a = std::get_if<OpApply>(&cur->node)) {
        if (auto* su = std::get_if<Sum>(&a->arg->node)) {
            std::vector<ExprPtr> terms;
            for (const auto& t : su->terms) terms.push_back(apply(a->op, t));
            changed = true;
            return sum(std::move(terms));
        }
        if (auto* sc = std::get_if<Scaled>(&a->arg->node)) {
            // O(c v) = c ^ O v for linear O, conj(c) ^ O v for anti-linear
            ScalarPtr s =
                chain_antilinear(a->op, oracle) ? conj_fold(sc->scalar) : sc->scalar;
            changed = true;
            return scaled(s, apply(a->op, sc->term), Attachment::Delimited);
        }
    }
    if (auto* sp = std::get_if<ScalarProduct>(&cur->node)) {
        if (auto* su = std::get_if<Sum>(&sp->left->node)) {
            std::vector<ExprPtr> terms;
            for (const auto& t : su->terms) terms.push_back(scalar_product(t, sp->right));
            changed = true;
            return sum(std::move(terms));
        }
        if (auto* su = std::get_if<Sum>(&sp->right->node)) {
            std::vector<ExprPtr> terms;
            for (const auto& t : su->terms) terms.push_back(scalar_product(sp->left, t));
            changed = true;
            return sum(std::move(terms));
        }
        if (auto* sc = std::get_if<Scaled>(&sp->left->node)) {  // anti-linear left slot
            changed = true;
            return scaled(conj_fold(sc->scalar), scalar_product(sc->term, sp->right),
                          Attachment::Delimited);
        }
        if (auto* sc = std::get_if<Scaled>(&sp->right->node)) {
            changed = true;
            return scaled(sc->scalar, scalar_product(sp->left, sc->term), Attachment::Delimited);
        }
    }
    return cur;
}

}  // namespace rewrite_detail

// Distributes operators and scalar products over sums and extracts scalar
// factors, conjugating where a slot or operator is anti-linear.
inline ExprPtr expand_linear(const ExprPtr& e, const LinearityOracle& oracle = {}) {
    ExprPtr cur = e;
    for (int guard = 0; guard < 10000; ++guard) {
        bool changed = false;
        cur = rewrite_detail::expand_linear_once(cur, oracle, changed);
        if (!changed) break;
    }
    return cur;
}

inline std::string trace_lines(const RewriteTrace& t, Notation n) {
    std::string out;
    std::size_t i = 1;
    for (const auto& step : t.steps) {
        std::string after;
        if (n == Notation::Braket) {
            RenderResult r = render_braket(step.after);
            after = r.ok() ? r.text : render_slash(step.after);
        } else {
            after = render_slash(step.after);
        }
        out += std::to_string(i++) + ". " + step.rule + ": " + after;
        if (!step.note.empty()) out += "  (" + step.note + ")";
        out += "\n";
    }
    return out;
}

}  // namespace repfree
