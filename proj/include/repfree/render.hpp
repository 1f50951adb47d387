// Renderers: canonical slash-notation text, bra-ket text (with structured
// unrepresentable reports), and LaTeX output for both dialects using the
// \lcdot / \sep macros. Rendering is deterministic: structurally equal
// trees produce identical strings.
#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "ast.hpp"
#include "model.hpp"

namespace repfree {

// true = the named operator symbol is anti-linear. Operator symbols are
// bound at check/eval time, so notation-level code takes this as an
// optional oracle; without one every symbol is assumed linear.
using LinearityOracle = std::function<bool(const std::string&)>;

inline LinearityOracle oracle_from(const HilbertModel& m) {
    return [&m](const std::string& sym) {
        auto it = m.operators.find(sym);
        return it != m.operators.end() && it->second.linearity == Linearity::AntiLinear;
    };
}

// An operator chain is anti-linear iff an odd number of its factors are;
// the adjoint of an anti-linear operator is again anti-linear.
inline bool chain_antilinear(const OpPtr& op, const LinearityOracle& oracle) {
    if (!oracle || !op) return false;
    if (auto* s = std::get_if<OpSymbol>(&op->node)) return oracle(s->name);
    if (auto* d = std::get_if<OpDagger>(&op->node)) return chain_antilinear(d->inner, oracle);
    if (auto* c = std::get_if<OpCompose>(&op->node)) {
        bool anti = false;
        for (const auto& f : c->factors)
            if (chain_antilinear(f, oracle)) anti = !anti;
        return anti;
    }
    return false;  // Identity, OuterOp
}

inline std::string format_complex(cplx_t v) {
    char buf[80];
    double re = v.real(), im = v.imag();
    if (std::signbit(im)) {
        std::snprintf(buf, sizeof buf, "(%.12g-%.12gi)", re, -im);
    } else {
        std::snprintf(buf, sizeof buf, "(%.12g+%.12gi)", re, im);
    }
    return buf;
}

struct RenderResult {
    std::string text;
    std::optional<std::string> unrepresentable;
    bool ok() const { return !unrepresentable.has_value(); }
};

// ---- slash notation -----------------------------------------------------

std::string render_slash(const ExprPtr& e);
std::string render_op_slash(const OpPtr& op);

namespace render_detail {

std::string scalar_slash(const ScalarPtr& s);

inline std::string slash_state_text(const std::string& label) { return "/" + label + "/"; }

// Operand position inside a scalar product or application: atoms render
// bare, anything with structure gets parentheses.
inline std::string slash_operand(const ExprPtr& e) {
    if (std::holds_alternative<State>(e->node)) return render_slash(e);
    if (std::holds_alternative<OpApply>(e->node)) return render_slash(e);
    if (auto* sc = std::get_if<Scaled>(&e->node)) {
        if (sc->attachment == Attachment::BoundToState) return render_slash(e);
    }
    return "(" + render_slash(e) + ")";
}

}  // namespace render_detail

inline std::string render_op_slash(const OpPtr& op) {
    if (auto* s = std::get_if<OpSymbol>(&op->node)) return s->name;
    if (auto* d = std::get_if<OpDagger>(&op->node)) return "dag(" + render_op_slash(d->inner) + ")";
    if (auto* c = std::get_if<OpCompose>(&op->node)) {
        std::string out;
        for (std::size_t i = 0; i < c->factors.size(); ++i) {
            if (i) out += " ";
            out += render_op_slash(c->factors[i]);
        }
        return out;
    }
    if (auto* i = std::get_if<OpIdentity>(&op->node))
        return i->basis.empty() ? "I" : "I[" + i->basis + "]";
    const auto& o = std::get<OpOuter>(op->node);
    return render_slash(outer(o.ket, o.bra));
}

inline std::string render_slash(const ExprPtr& e) {
    using namespace render_detail;
    if (auto* s = std::get_if<State>(&e->node)) return slash_state_text(s->label);
    if (auto* c = std::get_if<Covector>(&e->node)) {
        bool paren = std::holds_alternative<Sum>(c->inner->node);
        if (auto* sc = std::get_if<Scaled>(&c->inner->node))
            paren = sc->attachment == Attachment::Delimited;
        std::string inner = render_slash(c->inner);
        return (paren ? "(" + inner + ")" : inner) + " .";
    }
    if (auto* a = std::get_if<OpApply>(&e->node)) {
        if (std::holds_alternative<OpOuter>(a->op->node))
            return "(" + render_op_slash(a->op) + ") " + slash_operand(a->arg);
        std::string op = render_op_slash(a->op);
        if (std::holds_alternative<State>(a->arg->node)) return op + render_slash(a->arg);
        return op + "(" + render_slash(a->arg) + ")";
    }
    if (auto* sp = std::get_if<ScalarProduct>(&e->node))
        return slash_operand(sp->left) + " . " + slash_operand(sp->right);
    if (auto* o = std::get_if<OuterProduct>(&e->node)) {
        std::string ket = std::holds_alternative<Sum>(o->ket->node)
                              ? "(" + render_slash(o->ket) + ")"
                              : render_slash(o->ket);
        return ket + " ^ " + slash_operand(o->bra) + " .";
    }
    if (auto* sc = std::get_if<Scaled>(&e->node)) {
        if (sc->attachment == Attachment::BoundToState) {
            std::string t = std::holds_alternative<State>(sc->term->node) ||
                                    std::holds_alternative<OpApply>(sc->term->node)
                                ? render_slash(sc->term)
                                : "(" + render_slash(sc->term) + ")";
            return scalar_slash(sc->scalar) + t;
        }
        // Delimited: scalar-product factors follow the term (the paper's
        // /u/ ^ /v1/ . /w1/ layout); constants precede it (c ^ ...).
        std::string t = std::holds_alternative<Sum>(sc->term->node)
                            ? "(" + render_slash(sc->term) + ")"
                            : render_slash(sc->term);
        if (std::holds_alternative<ScalarRef>(sc->scalar->node))
            return t + " ^ " + scalar_slash(sc->scalar);
        return scalar_slash(sc->scalar) + " ^ " + t;
    }
    if (auto* s = std::get_if<Sum>(&e->node)) {
        std::string out;
        for (std::size_t i = 0; i < s->terms.size(); ++i) {
            if (i) out += " + ";
            bool paren = std::holds_alternative<Sum>(s->terms[i]->node);
            out += paren ? "(" + render_slash(s->terms[i]) + ")" : render_slash(s->terms[i]);
        }
        return out;
    }
    if (auto* me = std::get_if<MatrixElement>(&e->node)) {
        if (me->origin == MEOrigin::SlashDotless)
            return render_slash(me->bra) + render_op_slash(me->op) + render_slash(me->ket);
        // A chained bra-ket matrix element has no native slash form; its
        // canonical slash reading is the dotted scalar product.
        return slash_operand(me->bra) + " . " + render_op_slash(me->op) + render_slash(me->ket);
    }
    if (auto* r = std::get_if<ReducedMatrixElement>(&e->node))
        return "/" + r->bra + "//" + r->op + "//" + r->ket + "/";
    if (auto* s = std::get_if<ScalarAtom>(&e->node)) return scalar_slash(s->value);
    return render_op_slash(std::get<OpAtom>(e->node).op);
}

namespace render_detail {

inline std::string scalar_slash(const ScalarPtr& s) {
    if (auto* l = std::get_if<ScalarLiteral>(&s->node)) return format_complex(l->value);
    if (auto* c = std::get_if<ScalarConj>(&s->node)) return "conj(" + scalar_slash(c->inner) + ")";
    if (auto* t = std::get_if<ScalarTimes>(&s->node)) {
        std::string out;
        for (std::size_t i = 0; i < t->factors.size(); ++i) {
            if (i) out += " ^ ";
            out += scalar_slash(t->factors[i]);
        }
        return out;
    }
    const auto& r = std::get<ScalarRef>(s->node);
    return render_slash(r.expr);
}

}  // namespace render_detail

// ---- bra-ket notation ------------------------------------------------------

RenderResult render_braket(const ExprPtr& e, const LinearityOracle& oracle = {});

namespace render_detail {

inline std::string scalar_braket(const ScalarPtr& s, const LinearityOracle& oracle,
                                 std::optional<std::string>& bad);

// Ket-valued piece: |u>, O|u>, (2+0i)|u>, O(...).
inline std::string ket_text(const ExprPtr& e, const LinearityOracle& oracle,
                            std::optional<std::string>& bad) {
    if (bad) return "";
    if (auto* s = std::get_if<State>(&e->node)) return "|" + s->label + ">";
    if (auto* a = std::get_if<OpApply>(&e->node)) {
        if (std::holds_alternative<OpOuter>(a->op->node)) {
            RenderResult op = render_braket(op_atom(a->op), oracle);
            if (!op.ok()) { bad = op.unrepresentable; return ""; }
            return "(" + op.text + ")" + ket_text(a->arg, oracle, bad);
        }
        std::string arg = std::holds_alternative<State>(a->arg->node)
                              ? ket_text(a->arg, oracle, bad)
                              : "(" + ket_text(a->arg, oracle, bad) + ")";
        return render_op_slash(a->op) + arg;
    }
    if (auto* sc = std::get_if<Scaled>(&e->node))
        return scalar_braket(sc->scalar, oracle, bad) + ket_text(sc->term, oracle, bad);
    if (auto* s = std::get_if<Sum>(&e->node)) {
        std::string out = "(";
        for (std::size_t i = 0; i < s->terms.size(); ++i) {
            if (i) out += " + ";
            out += ket_text(s->terms[i], oracle, bad);
        }
        return out + ")";
    }
    bad = "no bra-ket ket form for this construct";
    return "";
}

// Bra-action piece for a covector whose representing vector is `inner`.
// <u| for a plain state; <u|X when inner = dag(X)|u>; <u|dag(Y) otherwise.
// Anti-linear chains cannot act on bras in chained form.
inline std::string bra_text(const ExprPtr& inner, const LinearityOracle& oracle,
                            std::optional<std::string>& bad) {
    if (bad) return "";
    if (auto* s = std::get_if<State>(&inner->node)) return "<" + s->label + "|";
    if (auto* a = std::get_if<OpApply>(&inner->node)) {
        if (!std::holds_alternative<State>(a->arg->node)) {
            bad = "bra of a compound vector expression";
            return "";
        }
        if (chain_antilinear(a->op, oracle)) {
            bad = "anti-linear operator in chained form";
            return "";
        }
        const auto& label = std::get<State>(a->arg->node).label;
        if (auto* d = std::get_if<OpDagger>(&a->op->node))
            return "<" + label + "|" + render_op_slash(d->inner);
        return "<" + label + "|" + render_op_slash(op_dagger(a->op));
    }
    bad = "bra of a compound vector expression";
    return "";
}

inline std::string scalar_braket(const ScalarPtr& s, const LinearityOracle& oracle,
                                 std::optional<std::string>& bad) {
    if (bad) return "";
    if (auto* l = std::get_if<ScalarLiteral>(&s->node)) return format_complex(l->value);
    if (auto* c = std::get_if<ScalarConj>(&s->node))
        return "conj(" + scalar_braket(c->inner, oracle, bad) + ")";
    if (auto* t = std::get_if<ScalarTimes>(&s->node)) {
        std::string out;
        for (std::size_t i = 0; i < t->factors.size(); ++i) {
            if (i) out += " ";
            out += scalar_braket(t->factors[i], oracle, bad);
        }
        return out;
    }
    RenderResult r = render_braket(std::get<ScalarRef>(s->node).expr, oracle);
    if (!r.ok()) { bad = r.unrepresentable; return ""; }
    return r.text;
}

}  // namespace render_detail

inline RenderResult render_braket(const ExprPtr& e, const LinearityOracle& oracle) {
    using namespace render_detail;
    std::optional<std::string> bad;
    auto done = [&](std::string text) {
        return bad ? RenderResult{"", bad} : RenderResult{std::move(text), std::nullopt};
    };

    if (std::holds_alternative<State>(e->node) || std::holds_alternative<OpApply>(e->node))
        return done(ket_text(e, oracle, bad));
    if (auto* c = std::get_if<Covector>(&e->node)) return done(bra_text(c->inner, oracle, bad));
    if (auto* sp = std::get_if<ScalarProduct>(&e->node)) {
        bool left_state = std::holds_alternative<State>(sp->left->node);
        bool right_state = std::holds_alternative<State>(sp->right->node);
        if (left_state && right_state) {
            return done("<" + std::get<State>(sp->left->node).label + "|" +
                        std::get<State>(sp->right->node).label + ">");
        }
        if (left_state) {  // <u|(O|v>)
            return done("<" + std::get<State>(sp->left->node).label + "|(" +
                        ket_text(sp->right, oracle, bad) + ")");
        }
        // Left slot carries an operator chain: bra-action form (<u|X)|v>.
        std::string bra = bra_text(sp->left, oracle, bad);
        std::string ket = right_state ? ket_text(sp->right, oracle, bad)
                                      : "(" + ket_text(sp->right, oracle, bad) + ")";
        return done("(" + bra + ")" + ket);
    }
    if (auto* o = std::get_if<OuterProduct>(&e->node)) {
        if (std::holds_alternative<State>(o->ket->node) &&
            std::holds_alternative<State>(o->bra->node)) {
            return done("|" + std::get<State>(o->ket->node).label + "><" +
                        std::get<State>(o->bra->node).label + "|");
        }
        return RenderResult{"", "outer product of compound expressions"};
    }
    if (auto* sc = std::get_if<Scaled>(&e->node)) {
        std::string s = scalar_braket(sc->scalar, oracle, bad);
        if (valence(sc->term) == Valence::Scalar) {
            RenderResult t = render_braket(sc->term, oracle);
            if (!t.ok()) return t;
            bool paren = std::holds_alternative<Sum>(sc->term->node);
            return done(s + (paren ? "(" + t.text + ")" : t.text));
        }
        return done(s + ket_text(sc->term, oracle, bad));
    }
    if (auto* s = std::get_if<Sum>(&e->node)) {
        std::string out;
        for (std::size_t i = 0; i < s->terms.size(); ++i) {
            RenderResult t = render_braket(s->terms[i], oracle);
            if (!t.ok()) return t;
            if (i) out += " + ";
            bool paren = std::holds_alternative<Sum>(s->terms[i]->node);
            out += paren ? "(" + t.text + ")" : t.text;
        }
        return done(out);
    }
    if (auto* me = std::get_if<MatrixElement>(&e->node)) {
        if (chain_antilinear(me->op, oracle))
            return RenderResult{"", "anti-linear operator in chained form"};
        if (!std::holds_alternative<State>(me->bra->node) ||
            !std::holds_alternative<State>(me->ket->node))
            return RenderResult{"", "matrix element of compound expressions"};
        return done("<" + std::get<State>(me->bra->node).label + "|" + render_op_slash(me->op) +
                    "|" + std::get<State>(me->ket->node).label + ">");
    }
    if (auto* r = std::get_if<ReducedMatrixElement>(&e->node))
        return done("<" + r->bra + "||" + r->op + "||" + r->ket + ">");
    if (auto* s = std::get_if<ScalarAtom>(&e->node)) return done(scalar_braket(s->value, oracle, bad));
    const auto& oa = std::get<OpAtom>(e->node);
    if (auto* oo = std::get_if<OpOuter>(&oa.op->node)) return render_braket(outer(oo->ket, oo->bra), oracle);
    return done(render_op_slash(oa.op));
}

// ---- LaTeX -----------------------------------------------------------------

enum class LatexDialect { Slash, Braket };

std::string render_latex(const ExprPtr& e, LatexDialect dialect);

namespace render_detail {

inline std::string latex_label(const std::string& label) {
    static const char* greek[] = {"alpha", "beta",  "gamma", "delta", "epsilon", "zeta",
                                  "eta",   "theta", "iota",  "kappa", "lambda",  "mu",
                                  "nu",    "xi",    "pi",    "rho",   "sigma",   "tau",
                                  "upsilon", "phi", "chi",   "psi",   "omega"};
    for (const char* g : greek)
        if (label == g) return "\\" + label;
    return label;
}

inline std::string latex_scalar(const ScalarPtr& s, LatexDialect d) {
    if (auto* l = std::get_if<ScalarLiteral>(&s->node)) return format_complex(l->value);
    if (auto* c = std::get_if<ScalarConj>(&s->node)) return "{" + latex_scalar(c->inner, d) + "}^{*}";
    if (auto* t = std::get_if<ScalarTimes>(&s->node)) {
        std::string out;
        for (const auto& f : t->factors) out += latex_scalar(f, d);
        return out;
    }
    return render_latex(std::get<ScalarRef>(s->node).expr, d);
}

inline std::string latex_op(const OpPtr& op, LatexDialect d) {
    if (auto* s = std::get_if<OpSymbol>(&op->node)) return latex_label(s->name);
    if (auto* dg = std::get_if<OpDagger>(&op->node)) return latex_op(dg->inner, d) + "^{\\dagger}";
    if (auto* c = std::get_if<OpCompose>(&op->node)) {
        std::string out;
        for (std::size_t i = 0; i < c->factors.size(); ++i) {
            if (i) out += " ";
            out += latex_op(c->factors[i], d);
        }
        return out;
    }
    if (std::holds_alternative<OpIdentity>(op->node)) return "I";
    const auto& o = std::get<OpOuter>(op->node);
    return render_latex(outer(o.ket, o.bra), d);
}

}  // namespace render_detail

inline std::string render_latex(const ExprPtr& e, LatexDialect d) {
    using namespace render_detail;
    const bool slash = d == LatexDialect::Slash;
    auto st = [&](const std::string& label) {
        return slash ? "/" + latex_label(label) + "/" : "|" + latex_label(label) + "\\rangle";
    };

    if (auto* s = std::get_if<State>(&e->node)) return st(s->label);
    if (auto* c = std::get_if<Covector>(&e->node)) {
        if (slash) return render_latex(c->inner, d) + "\\lcdot";
        if (auto* inner = std::get_if<State>(&c->inner->node))
            return "\\langle " + latex_label(inner->label) + "|";
        if (auto* a = std::get_if<OpApply>(&c->inner->node)) {
            if (auto* dg = std::get_if<OpDagger>(&a->op->node))
                return "\\langle " + latex_label(std::get<State>(a->arg->node).label) + "|" +
                       latex_op(dg->inner, d);
            return "\\langle " + latex_label(std::get<State>(a->arg->node).label) + "|" +
                   latex_op(op_dagger(a->op), d);
        }
        return "(" + render_latex(c->inner, d) + ")^{\\lcdot}";
    }
    if (auto* a = std::get_if<OpApply>(&e->node)) {
        std::string arg = std::holds_alternative<State>(a->arg->node)
                              ? render_latex(a->arg, d)
                              : "(" + render_latex(a->arg, d) + ")";
        if (std::holds_alternative<OpOuter>(a->op->node))
            return "(" + latex_op(a->op, d) + ")" + arg;
        return latex_op(a->op, d) + arg;
    }
    if (auto* sp = std::get_if<ScalarProduct>(&e->node)) {
        if (slash) return render_latex(sp->left, d) + "\\lcdot" + render_latex(sp->right, d);
        if (std::holds_alternative<State>(sp->left->node)) {
            const auto& l = std::get<State>(sp->left->node).label;
            if (std::holds_alternative<State>(sp->right->node))
                return "\\langle " + latex_label(l) + "|" +
                       latex_label(std::get<State>(sp->right->node).label) + "\\rangle";
            return "\\langle " + latex_label(l) + "|(" + render_latex(sp->right, d) + ")";
        }
        return "(" + render_latex(covector(sp->left), d) + ")" + render_latex(sp->right, d);
    }
    if (auto* o = std::get_if<OuterProduct>(&e->node)) {
        if (slash) return render_latex(o->ket, d) + "\\sep" + render_latex(o->bra, d) + "\\lcdot";
        return render_latex(o->ket, d) + render_latex(covector(o->bra), d);
    }
    if (auto* sc = std::get_if<Scaled>(&e->node)) {
        std::string s = latex_scalar(sc->scalar, d);
        if (sc->attachment == Attachment::BoundToState) return s + render_latex(sc->term, d);
        if (!slash) return s + render_latex(sc->term, d);
        if (std::holds_alternative<ScalarRef>(sc->scalar->node))
            return render_latex(sc->term, d) + "\\sep" + s;
        return s + "\\sep" + render_latex(sc->term, d);
    }
    if (auto* s = std::get_if<Sum>(&e->node)) {
        std::string out;
        for (std::size_t i = 0; i < s->terms.size(); ++i) {
            if (i) out += " + ";
            out += render_latex(s->terms[i], d);
        }
        return out;
    }
    if (auto* me = std::get_if<MatrixElement>(&e->node)) {
        if (!slash)
            return "\\langle " + latex_label(std::get<State>(me->bra->node).label) + "|" +
                   latex_op(me->op, d) + "|" + latex_label(std::get<State>(me->ket->node).label) +
                   "\\rangle";
        if (me->origin == MEOrigin::SlashDotless)
            return render_latex(me->bra, d) + latex_op(me->op, d) + render_latex(me->ket, d);
        return render_latex(me->bra, d) + "\\lcdot " + latex_op(me->op, d) + render_latex(me->ket, d);
    }
    if (auto* r = std::get_if<ReducedMatrixElement>(&e->node)) {
        if (slash)
            return "/" + latex_label(r->bra) + "//" + latex_label(r->op) + "//" +
                   latex_label(r->ket) + "/";
        return "\\langle " + latex_label(r->bra) + "||" + latex_label(r->op) + "||" +
               latex_label(r->ket) + "\\rangle";
    }
    if (auto* s = std::get_if<ScalarAtom>(&e->node)) return latex_scalar(s->value, d);
    return latex_op(std::get<OpAtom>(e->node).op, d);
}

// Preamble lines under which the emitted LaTeX compiles standalone.
inline std::string latex_preamble() {
    return "\\usepackage{amssymb}\n"
           "\\newcommand{\\lcdot}{\\mathbin{\\stackrel{\\centerdot}{}}}\n"
           "\\newcommand{\\sep}{_{\\scriptscriptstyle\\land}}\n";
}

}  // namespace repfree
