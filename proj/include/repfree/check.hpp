// Well-formedness checking of parsed expressions against a model's domain
// facts, with rule identifiers, source spans and suggested equivalent
// expressions.
//
// Rules:
//   BK1  chained <u|O|v> needs u in D(O+) and v in D(O) simultaneously
//   BK2  bra action <u|O (bare or applied) needs u in D(O+)
//   BK3  chained bra-ket forms are undefined for anti-linear operators
//   SL1  /u/ . O/v/ (and the dotless /u/O/v/) needs v in D(O)
//   SL2  O/u/ . /v/ and the covector O/u/ . need u in D(O)
//   SL3  O/u/ . O'/v/ needs both memberships
//   FN1  a bra may only be formed from a bounded functional (Riesz);
//        unbounded declared functionals have no representing vector
// Unknown membership downgrades an error to a warning.
#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ast.hpp"
#include "model.hpp"
#include "render.hpp"

namespace repfree {

enum class Severity { Error, Warning, Info };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::string rule;
    SourceSpan span;
    std::string message;
    ExprPtr suggestion;  // well-formed equivalent, when one exists
};

struct CheckOptions {
    Notation notation = Notation::Slash;
    // Literature variant where operators in <u|O|v> act only to the right.
    // Not part of the scheme (it does not help the bra-action forms); kept
    // behind a flag for comparison, default off.
    bool right_action_convention = false;
};

namespace check_detail {

inline const char* severity_word(Severity s) {
    switch (s) {
        case Severity::Error: return "error";
        case Severity::Warning: return "warning";
        default: return "info";
    }
}

// Flattens nested applications O(K(...)) into one chain and digs out the
// base state label, looking through scalar factors.
struct AppChain {
    std::vector<OpPtr> ops;  // outermost first
    std::optional<std::string> state_label;
    SourceSpan span;
};

inline AppChain flatten_apply(const ExprPtr& e) {
    AppChain out;
    out.span = e->span;
    ExprPtr cur = e;
    while (true) {
        if (auto* a = std::get_if<OpApply>(&cur->node)) {
            out.ops.push_back(a->op);
            cur = a->arg;
        } else if (auto* s = std::get_if<Scaled>(&cur->node)) {
            cur = s->term;  // scaling never changes domains
        } else {
            break;
        }
    }
    if (auto* st = std::get_if<State>(&cur->node)) out.state_label = st->label;
    return out;
}

// Collects (symbol, dagger parity) pairs of a chain; false when the chain
// contains a non-symbol factor that blocks the analytic rule.
inline bool collect_symbols(const OpPtr& op, bool dag,
                            std::vector<std::pair<std::string, bool>>& out) {
    if (auto* s = std::get_if<OpSymbol>(&op->node)) {
        out.emplace_back(s->name, dag);
        return true;
    }
    if (auto* d = std::get_if<OpDagger>(&op->node)) return collect_symbols(d->inner, !dag, out);
    if (auto* c = std::get_if<OpCompose>(&op->node)) {
        for (const auto& f : c->factors)
            if (!collect_symbols(f, dag, out)) return false;
        return true;
    }
    if (std::holds_alternative<OpIdentity>(op->node)) return true;
    return false;  // outer-product factors: no power-law rule
}

// Membership of a (possibly composed, possibly daggered) operator chain
// acting on a declared state or bounded functional. Declared overrides
// apply to single-symbol chains; compositions fall back to the analytic
// power-law rule with the summed spectral exponent.
inline Membership chain_membership(const HilbertModel& m, const std::string& label,
                                   const std::vector<OpPtr>& ops, bool extra_dagger = false) {
    if (!m.truncated()) return Membership::In;
    std::vector<std::pair<std::string, bool>> symbols;
    for (const auto& op : ops)
        if (!collect_symbols(op, extra_dagger, symbols)) return Membership::Unknown;
    if (symbols.empty()) return Membership::In;  // identity chain
    if (symbols.size() == 1) return domain_membership(m, label, symbols[0].first, symbols[0].second);
    double p_eff = 0.0;
    for (const auto& [sym, dag] : symbols) {
        const OperatorSpec& spec = m.op(sym);
        if (!spec.diagonal) return Membership::Unknown;
        p_eff += spec.diag_exponent;
    }
    double q = 0.0;
    if (auto it = m.states.find(label); it != m.states.end()) q = it->second.decay;
    else if (auto fit = m.functionals.find(label); fit != m.functionals.end()) q = fit->second.growth;
    else return Membership::Unknown;
    return power_law_membership(q, p_eff);
}

class Checker {
public:
    Checker(const HilbertModel& m, CheckOptions opt) : m_(m), opt_(opt), oracle_(oracle_from(m)) {}

    std::vector<Diagnostic> run(const ExprPtr& e) {
        walk(e, Pos::Ket);
        return std::move(diags_);
    }

private:
    enum class Pos { Ket, Bra };  // linear vs conjugated slot

    const HilbertModel& m_;
    CheckOptions opt_;
    LinearityOracle oracle_;
    std::vector<Diagnostic> diags_;

    void emit(Severity s, std::string rule, SourceSpan span, std::string msg,
              ExprPtr suggestion = nullptr) {
        diags_.push_back({s, std::move(rule), span, std::move(msg), std::move(suggestion)});
    }

    bool resolve_state(const std::string& label, SourceSpan span, Pos pos) {
        if (m_.has_state(label)) return true;
        if (m_.has_functional(label)) {
            const FunctionalDef& f = m_.functionals.at(label);
            if (pos == Pos::Bra) {
                if (f.bounded()) {
                    emit(Severity::Info, "FN1", span,
                         "bounded functional '" + label +
                             "' used as a bra via its Riesz representing vector");
                    return true;
                }
                emit(Severity::Error, "FN1", span,
                     "functional '" + label +
                         "' is unbounded and has no representing vector; it cannot be a bra");
                return false;
            }
            emit(Severity::Error, "FN1", span,
                 "functional '" + label + "' is not a state vector");
            return false;
        }
        emit(Severity::Error, "resolve", span, "unknown state label '" + label + "'");
        return false;
    }

    void resolve_ops(const OpPtr& op, SourceSpan span) {
        if (auto* s = std::get_if<OpSymbol>(&op->node)) {
            if (!m_.has_operator(s->name))
                emit(Severity::Error, "resolve", span, "unknown operator symbol '" + s->name + "'");
            return;
        }
        if (auto* d = std::get_if<OpDagger>(&op->node)) return resolve_ops(d->inner, span);
        if (auto* c = std::get_if<OpCompose>(&op->node)) {
            for (const auto& f : c->factors) resolve_ops(f, span);
            return;
        }
        if (auto* i = std::get_if<OpIdentity>(&op->node)) {
            if (!i->basis.empty() && m_.bases.find(i->basis) == m_.bases.end())
                emit(Severity::Error, "resolve", span, "unknown basis '" + i->basis + "'");
            return;
        }
        const auto& o = std::get<OpOuter>(op->node);
        walk(o.ket, Pos::Ket);
        walk(o.bra, Pos::Bra);
    }

    bool ops_resolved(const std::vector<OpPtr>& ops) {
        std::vector<std::pair<std::string, bool>> symbols;
        for (const auto& op : ops) {
            std::vector<std::pair<std::string, bool>> local;
            if (collect_symbols(op, false, local))
                for (auto& s : local)
                    if (!m_.has_operator(s.first)) return false;
        }
        return true;
    }

    // Reports a membership failure of `ops` applied to the state in `chain`
    // under the given rule.
    void report_membership(const AppChain& chain, const std::string& rule, bool extra_dagger,
                           const std::string& what, ExprPtr suggestion = nullptr) {
        if (!chain.state_label || chain.ops.empty()) return;
        if (!m_.has_state(*chain.state_label) && !m_.has_functional(*chain.state_label)) return;
        if (!ops_resolved(chain.ops)) return;
        Membership mem = chain_membership(m_, *chain.state_label, chain.ops, extra_dagger);
        if (mem == Membership::In) return;
        if (mem == Membership::Out) {
            emit(Severity::Error, rule, chain.span, what + " is outside the operator's domain",
                 std::move(suggestion));
        } else {
            emit(Severity::Warning, rule, chain.span,
                 "membership of " + what + " in the operator's domain is unknown");
        }
    }

    void walk(const ExprPtr& e, Pos pos, bool membership_handled = false) {
        if (auto* s = std::get_if<State>(&e->node)) {
            resolve_state(s->label, e->span, pos);
            return;
        }
        if (auto* c = std::get_if<Covector>(&e->node)) {
            AppChain chain = flatten_apply(c->inner);
            if (!chain.ops.empty())
                report_membership(chain, opt_.notation == Notation::Braket ? "BK2" : "SL2", false,
                                  "the covector's state");
            walk(c->inner, Pos::Bra, true);
            return;
        }
        if (auto* a = std::get_if<OpApply>(&e->node)) {
            resolve_ops(a->op, e->span);
            if (!membership_handled) {
                AppChain chain = flatten_apply(e);
                report_membership(chain, pos == Pos::Bra
                                             ? (opt_.notation == Notation::Braket ? "BK2" : "SL2")
                                             : "SL2",
                                  false, "the state");
            }
            walk(a->arg, pos, true);
            return;
        }
        if (auto* sp = std::get_if<ScalarProduct>(&e->node)) {
            AppChain left = flatten_apply(sp->left);
            AppChain right = flatten_apply(sp->right);
            bool lops = !left.ops.empty(), rops = !right.ops.empty();
            if (lops && rops) {
                report_membership(left, "SL3", false, "the left state");
                report_membership(right, "SL3", false, "the right state");
            } else if (lops) {
                std::string rule = opt_.notation == Notation::Braket ? "BK2" : "SL2";
                ExprPtr sug;
                if (rule == "BK2") sug = first_suggestion_for_bra_action(*sp);
                report_membership(left, rule, false, "the bra-side state", sug);
            } else if (rops) {
                report_membership(right, "SL1", false, "the ket-side state");
            }
            walk(sp->left, Pos::Bra, true);
            walk(sp->right, Pos::Ket, true);
            return;
        }
        if (auto* o = std::get_if<OuterProduct>(&e->node)) {
            AppChain ket = flatten_apply(o->ket);
            AppChain bra = flatten_apply(o->bra);
            if (!ket.ops.empty()) report_membership(ket, "SL2", false, "the ket part");
            if (!bra.ops.empty()) report_membership(bra, "SL2", false, "the bra part");
            walk(o->ket, Pos::Ket, true);
            walk(o->bra, Pos::Bra, true);
            return;
        }
        if (auto* sc = std::get_if<Scaled>(&e->node)) {
            walk_scalar(sc->scalar);
            walk(sc->term, pos, membership_handled);
            return;
        }
        if (auto* s = std::get_if<Sum>(&e->node)) {
            for (const auto& t : s->terms) walk(t, pos);
            return;
        }
        if (auto* me = std::get_if<MatrixElement>(&e->node)) {
            resolve_ops(me->op, e->span);
            if (auto* b = std::get_if<State>(&me->bra->node))
                resolve_state(b->label, me->bra->span, Pos::Bra);
            else
                walk(me->bra, Pos::Bra);
            if (auto* k = std::get_if<State>(&me->ket->node))
                resolve_state(k->label, me->ket->span, Pos::Ket);
            else
                walk(me->ket, Pos::Ket);
            check_matrix_element(*me, e->span);
            return;
        }
        if (std::holds_alternative<ReducedMatrixElement>(e->node)) return;  // notation-only atom
        if (auto* s = std::get_if<ScalarAtom>(&e->node)) {
            walk_scalar(s->value);
            return;
        }
        resolve_ops(std::get<OpAtom>(e->node).op, e->span);
    }

    void walk_scalar(const ScalarPtr& s) {
        if (auto* c = std::get_if<ScalarConj>(&s->node)) return walk_scalar(c->inner);
        if (auto* t = std::get_if<ScalarTimes>(&s->node)) {
            for (const auto& f : t->factors) walk_scalar(f);
            return;
        }
        if (auto* r = std::get_if<ScalarRef>(&s->node)) walk(r->expr, Pos::Ket);
    }

    void check_matrix_element(const MatrixElement& me, SourceSpan span) {
        auto* b = std::get_if<State>(&me.bra->node);
        auto* k = std::get_if<State>(&me.ket->node);
        if (!b || !k) return;
        if (!ops_resolved({me.op})) return;

        if (me.origin == MEOrigin::SlashDotless) {
            AppChain chain{{me.op}, k->label, me.ket->span};
            report_membership(chain, "SL1", false, "the ket-side state");
            return;
        }
        if (chain_antilinear(me.op, oracle_)) {
            emit(Severity::Error, "BK3", span,
                 "chained bra-ket form with an anti-linear operator; use the parenthesized "
                 "action forms");
            return;
        }
        bool bra_known = m_.has_state(b->label) || m_.has_functional(b->label);
        bool ket_known = m_.has_state(k->label) || m_.has_functional(k->label);
        if (!bra_known || !ket_known) return;
        Membership bra_mem = opt_.right_action_convention
                                 ? Membership::In
                                 : chain_membership(m_, b->label, {me.op}, /*extra_dagger=*/true);
        Membership ket_mem = chain_membership(m_, k->label, {me.op});
        if (bra_mem == Membership::In && ket_mem == Membership::In) return;
        if (bra_mem == Membership::Out || ket_mem == Membership::Out) {
            ExprPtr sug = first_me_suggestion(me, bra_mem, ket_mem);
            std::string which = bra_mem == Membership::Out
                                    ? (ket_mem == Membership::Out ? "neither side lies"
                                                                  : "the bra-side state does not lie")
                                    : "the ket-side state does not lie";
            emit(Severity::Error, "BK1", me.bra->span,
                 "chained matrix element: " + which + " in the required domain", std::move(sug));
        } else {
            emit(Severity::Warning, "BK1", me.bra->span,
                 "chained matrix element: a required domain membership is unknown");
        }
    }

    // Display form for dag(O): the declared adjoint symbol when one exists.
    OpPtr display_dagger(const OpPtr& op) const {
        if (auto* s = std::get_if<OpSymbol>(&op->node)) {
            auto it = m_.operators.find(s->name);
            if (it != m_.operators.end() && it->second.declared_adjoint)
                return op_symbol(*it->second.declared_adjoint);
        }
        if (auto* d = std::get_if<OpDagger>(&op->node)) return d->inner;
        return op_dagger(op);
    }

    ExprPtr first_me_suggestion(const MatrixElement& me, Membership bra_mem, Membership ket_mem) {
        if (ket_mem == Membership::In)
            return scalar_product(me.bra, apply(me.op, me.ket));
        if (bra_mem == Membership::In)
            return scalar_product(apply(display_dagger(me.op), me.bra), me.ket);
        return nullptr;
    }

    ExprPtr first_suggestion_for_bra_action(const ScalarProduct& sp) {
        // (<u|X)|v> == /u/ . undag(X)/v/ when v is in D(undag(X)).
        AppChain left = flatten_apply(sp.left);
        if (!left.state_label || left.ops.size() != 1) return nullptr;
        OpPtr undag;
        if (auto* d = std::get_if<OpDagger>(&left.ops[0]->node)) undag = d->inner;
        else undag = op_dagger(left.ops[0]);
        AppChain right = flatten_apply(sp.right);
        if (!right.state_label || !right.ops.empty()) return nullptr;
        if (chain_membership(m_, *right.state_label, {undag}) != Membership::In) return nullptr;
        return scalar_product(state(*left.state_label), apply(undag, state(*right.state_label)));
    }
};

}  // namespace check_detail

inline std::vector<Diagnostic> check(const ExprPtr& e, const HilbertModel& m,
                                     CheckOptions opt = {}) {
    check_detail::Checker c(m, opt);
    return c.run(e);
}

// Well-formed equivalents of a failing chained matrix element (or bra
// action): every member of { /u/ . O/v/, dag(O)/u/ . /v/ } that re-checks
// clean. Empty when the matrix element does not exist at all.
inline std::vector<ExprPtr> suggest(const ExprPtr& e, const HilbertModel& m,
                                    CheckOptions opt = {}) {
    std::vector<ExprPtr> out;
    auto try_add = [&](ExprPtr cand) {
        if (!cand) return;
        for (const auto& d : check(cand, m, {Notation::Slash, opt.right_action_convention}))
            if (d.severity == Severity::Error) return;
        for (const auto& prev : out)
            if (equal(prev, cand)) return;
        out.push_back(std::move(cand));
    };
    if (auto* me = std::get_if<MatrixElement>(&e->node)) {
        try_add(scalar_product(me->bra, apply(me->op, me->ket)));
        OpPtr dagged;
        if (auto* s = std::get_if<OpSymbol>(&me->op->node)) {
            auto it = m.operators.find(s->name);
            if (it != m.operators.end() && it->second.declared_adjoint)
                dagged = op_symbol(*it->second.declared_adjoint);
        }
        if (!dagged) dagged = op_dagger(me->op);
        try_add(scalar_product(apply(dagged, me->bra), me->ket));
    } else if (auto* sp = std::get_if<ScalarProduct>(&e->node)) {
        check_detail::AppChain left = check_detail::flatten_apply(sp->left);
        if (left.state_label && left.ops.size() == 1) {
            OpPtr undag;
            if (auto* d = std::get_if<OpDagger>(&left.ops[0]->node)) undag = d->inner;
            else undag = op_dagger(left.ops[0]);
            try_add(scalar_product(state(*left.state_label), apply(undag, sp->right)));
            try_add(scalar_product(sp->left, sp->right));
        }
    }
    return out;
}

inline std::string explain(std::string_view rule) {
    if (rule == "BK1")
        return "BK1: a chained matrix element <u|O|v> is defined only when u lies in D(dag(O)) "
               "and v lies in D(O) simultaneously; when either membership fails, the chained "
               "form cannot represent the matrix element even if (u, Ov) or (dag(O)u, v) exists "
               "on its own. Use /u/ . O/v/ or dag(O)/u/ . /v/ instead.";
    if (rule == "BK2")
        return "BK2: the bra action <u|O denotes the covector conjugate to dag(O)|u>, so it "
               "exists only when u lies in D(dag(O)) - membership of u in D(O) is not enough. "
               "The slash form dag(O)/u/ . makes the required domain explicit.";
    if (rule == "BK3")
        return "BK3: chained bra-ket forms are undefined for anti-linear operators such as time "
               "reversal; only the parenthesized action forms <u|(K|v>) are meaningful.";
    if (rule == "SL1")
        return "SL1: /u/ . O/v/ applies O to /v/, so /v/ must lie in D(O).";
    if (rule == "SL2")
        return "SL2: O/u/ . /v/ and the covector O/u/ . apply O to /u/, so /u/ must lie in D(O).";
    if (rule == "SL3")
        return "SL3: O/u/ . O'/v/ requires /u/ in D(O) and /v/ in D(O').";
    if (rule == "FN1")
        return "FN1: a bra can only stand for a bounded linear functional: scalar-product "
               "functionals are bounded by the Schwarz inequality, and by the Riesz theorem "
               "every bounded functional on the whole space is (u, .) for a unique vector u. "
               "An unbounded functional has no representing vector, so no bra can denote it.";
    if (rule == "resolve")
        return "resolve: every state label and operator symbol must be declared in the model.";
    throw std::invalid_argument("unknown rule id '" + std::string(rule) + "'");
}

// Line-oriented report form: "severity rule line:col message [suggestion]".
inline std::string format_diagnostic(const Diagnostic& d) {
    std::string out = std::string(check_detail::severity_word(d.severity)) + " " + d.rule + " " +
                      std::to_string(d.span.line) + ":" + std::to_string(d.span.column) + " " +
                      d.message;
    if (d.suggestion) out += " [suggestion: " + render_slash(d.suggestion) + "]";
    return out;
}

}  // namespace repfree
