// Numeric evaluation of checked expressions on models, the Riesz
// representation solver, and the truncation-scale probes (unbounded
// functional growth, Hellinger-Toplitz norm growth, convergence sweeps).
//
// Truncated models never refuse ill-domained compositions: at any finite N
// everything is defined, and divergence shows up through the sweeps. The
// checker, not the evaluator, owns well-formedness; `force` only marks the
// produced Value.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ast.hpp"
#include "complex_linalg.hpp"
#include "model.hpp"

namespace repfree {

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Value {
    enum class Kind { Scalar, Vector, Covector, Matrix };
    Kind kind = Kind::Scalar;
    cplx scalar{};
    cvec coeffs;  // Vector; for Covector these are the conjugates of the
                  // representing vector's coefficients (Riesz correspondence)
    cmat matrix;
    std::optional<std::size_t> truncation;
    bool forced = false;
};

struct EvalOptions {
    std::optional<std::size_t> truncation;
    bool force = false;
};

namespace eval_detail {

// ---- finite models: dense actions -----------------------------------------

// An operator action w = L * (anti ? conj(v) : v).
struct Action {
    cmat lin;
    bool anti = false;
};

inline Action compose_actions(const Action& outer, const Action& inner) {
    // outer(inner(v)) = Lo * sigma_o(Li * sigma_i(v))
    cmat li = outer.anti ? [&] {
        cmat c = inner.lin;
        for (auto& row : c)
            for (auto& x : row) x = std::conj(x);
        return c;
    }()
                         : inner.lin;
    return {matmul(outer.lin, li), outer.anti != inner.anti};
}

cvec eval_vector_finite(const ExprPtr& e, const HilbertModel& m);
cplx eval_scalar_finite(const ScalarPtr& s, const HilbertModel& m);

inline Action op_action_finite(const OpPtr& op, const HilbertModel& m) {
    if (auto* s = std::get_if<OpSymbol>(&op->node)) {
        const OperatorSpec& spec = m.op(s->name);
        return {spec.matrix, spec.linearity == Linearity::AntiLinear};
    }
    if (auto* d = std::get_if<OpDagger>(&op->node)) {
        Action a = op_action_finite(d->inner, m);
        // (L, linear)+ = (L+, linear); the adjoint of v -> L conj(v) is
        // v -> L^T conj(v), which is what (O'u, v) = conj((u, Ov)) forces.
        if (!a.anti) return {dagger(a.lin), false};
        return {transpose(a.lin), true};
    }
    if (auto* c = std::get_if<OpCompose>(&op->node)) {
        Action acc{identity_matrix(m.dim), false};
        for (const auto& f : c->factors) acc = compose_actions(acc, op_action_finite(f, m));
        return acc;
    }
    if (auto* i = std::get_if<OpIdentity>(&op->node)) {
        if (i->basis.empty()) return {identity_matrix(m.dim), false};
        cmat p = zeros(m.dim, m.dim);
        for (const auto& b : basis_vectors(m, i->basis)) p = mat_add(p, rank_one(b, b));
        return {p, false};
    }
    const auto& o = std::get<OpOuter>(op->node);
    return {rank_one(eval_vector_finite(o.ket, m), eval_vector_finite(o.bra, m)), false};
}

inline cvec apply_action(const Action& a, const cvec& v) {
    return matvec(a.lin, a.anti ? repfree::conj(v) : v);
}

inline cvec eval_vector_finite(const ExprPtr& e, const HilbertModel& m) {
    if (auto* s = std::get_if<State>(&e->node)) return m.state_coeffs(s->label, m.dim);
    if (auto* a = std::get_if<OpApply>(&e->node))
        return apply_action(op_action_finite(a->op, m), eval_vector_finite(a->arg, m));
    if (auto* sc = std::get_if<Scaled>(&e->node))
        return scale(eval_scalar_finite(sc->scalar, m), eval_vector_finite(sc->term, m));
    if (auto* su = std::get_if<Sum>(&e->node)) {
        cvec acc;
        for (const auto& t : su->terms) {
            cvec v = eval_vector_finite(t, m);
            acc = acc.empty() ? v : add(acc, v);
        }
        if (acc.empty()) throw EvalError("empty sum");
        return acc;
    }
    throw EvalError("expected a vector-valued expression");
}

inline cplx eval_scalar_expr_finite(const ExprPtr& e, const HilbertModel& m) {
    if (auto* sp = std::get_if<ScalarProduct>(&e->node))
        return inner(eval_vector_finite(sp->left, m), eval_vector_finite(sp->right, m));
    if (auto* me = std::get_if<MatrixElement>(&e->node))
        return inner(eval_vector_finite(me->bra, m),
                     apply_action(op_action_finite(me->op, m), eval_vector_finite(me->ket, m)));
    if (auto* sc = std::get_if<Scaled>(&e->node))
        return eval_scalar_finite(sc->scalar, m) * eval_scalar_expr_finite(sc->term, m);
    if (auto* su = std::get_if<Sum>(&e->node)) {
        cplx acc = 0.0;
        for (const auto& t : su->terms) acc += eval_scalar_expr_finite(t, m);
        return acc;
    }
    if (auto* sa = std::get_if<ScalarAtom>(&e->node)) return eval_scalar_finite(sa->value, m);
    if (std::holds_alternative<ReducedMatrixElement>(e->node))
        throw EvalError("reduced matrix elements carry no numeric semantics");
    throw EvalError("expected a scalar-valued expression");
}

inline cplx eval_scalar_finite(const ScalarPtr& s, const HilbertModel& m) {
    if (auto* l = std::get_if<ScalarLiteral>(&s->node)) return l->value;
    if (auto* c = std::get_if<ScalarConj>(&s->node)) return std::conj(eval_scalar_finite(c->inner, m));
    if (auto* t = std::get_if<ScalarTimes>(&s->node)) {
        cplx acc = 1.0;
        for (const auto& f : t->factors) acc *= eval_scalar_finite(f, m);
        return acc;
    }
    return eval_scalar_expr_finite(std::get<ScalarRef>(s->node).expr, m);
}

// ---- truncated models: power-law monomial streams ---------------------------

// A truncated vector expression reduces to a finite list of monomial
// sequences c * n^alpha * (-1)^(n-1) (the model family is closed under
// diagonal actions, conjugation, scaling and finite sums), so scalar
// products stream in O(N) without materializing coefficient vectors.
struct PowerTerm {
    cplx coeff;
    double exponent;
    bool alternating;
};
using PowerSum = std::vector<PowerTerm>;

struct DiagAction {
    double exponent = 0.0;
    bool anti = false;
};

cplx eval_scalar_truncated(const ScalarPtr& s, const HilbertModel& m, std::size_t n);

inline DiagAction op_action_truncated(const OpPtr& op, const HilbertModel& m) {
    if (auto* s = std::get_if<OpSymbol>(&op->node)) {
        const OperatorSpec& spec = m.op(s->name);
        if (!spec.diagonal) throw EvalError("truncated operators must be diagonal");
        return {spec.diag_exponent, spec.linearity == Linearity::AntiLinear};
    }
    if (auto* d = std::get_if<OpDagger>(&op->node)) return op_action_truncated(d->inner, m);
    if (auto* c = std::get_if<OpCompose>(&op->node)) {
        DiagAction acc;
        for (const auto& f : c->factors) {
            DiagAction a = op_action_truncated(f, m);
            acc.exponent += a.exponent;
            acc.anti = acc.anti != a.anti;
        }
        return acc;
    }
    if (std::holds_alternative<OpIdentity>(op->node)) return {};
    throw EvalError("projection-type operators are not supported on truncated models");
}

inline PowerSum reduce_vector_truncated(const ExprPtr& e, const HilbertModel& m, std::size_t n) {
    if (auto* s = std::get_if<State>(&e->node)) {
        if (auto it = m.states.find(s->label); it != m.states.end())
            return {{cplx(1.0, 0.0), -it->second.decay, it->second.phase == PhaseRule::Alternating}};
        if (auto it = m.functionals.find(s->label); it != m.functionals.end())
            return {{cplx(1.0, 0.0), -it->second.growth, false}};  // conj(F(e_n)), real rule
        throw EvalError("unknown state label '" + s->label + "'");
    }
    if (auto* a = std::get_if<OpApply>(&e->node)) {
        PowerSum ps = reduce_vector_truncated(a->arg, m, n);
        DiagAction act = op_action_truncated(a->op, m);
        for (auto& t : ps) {
            if (act.anti) t.coeff = std::conj(t.coeff);
            t.exponent += act.exponent;
        }
        return ps;
    }
    if (auto* sc = std::get_if<Scaled>(&e->node)) {
        cplx c = eval_scalar_truncated(sc->scalar, m, n);
        PowerSum ps = reduce_vector_truncated(sc->term, m, n);
        for (auto& t : ps) t.coeff *= c;
        return ps;
    }
    if (auto* su = std::get_if<Sum>(&e->node)) {
        PowerSum acc;
        for (const auto& t : su->terms) {
            PowerSum ps = reduce_vector_truncated(t, m, n);
            acc.insert(acc.end(), ps.begin(), ps.end());
        }
        return acc;
    }
    throw EvalError("expression is not reducible on a truncated model");
}

inline cplx power_value(const PowerSum& ps, std::size_t n) {
    cplx acc = 0.0;
    for (const auto& t : ps) {
        double mag = std::pow(static_cast<double>(n), t.exponent);
        if (t.alternating && n % 2 == 0) mag = -mag;
        acc += t.coeff * mag;
    }
    return acc;
}

// Streams sum_{n<=N} conj(l_n) r_n for each checkpoint level (strictly
// increasing). The workhorse behind truncation sweeps.
inline std::vector<cplx> stream_inner(const PowerSum& l, const PowerSum& r,
                                      const std::vector<std::size_t>& levels) {
    std::vector<cplx> out;
    out.reserve(levels.size());
    cplx acc = 0.0;
    std::size_t next = 0;
    for (std::size_t n = 1; next < levels.size(); ++n) {
        acc += std::conj(power_value(l, n)) * power_value(r, n);
        while (next < levels.size() && n == levels[next]) {
            out.push_back(acc);
            ++next;
        }
    }
    return out;
}

inline cplx eval_scalar_expr_truncated(const ExprPtr& e, const HilbertModel& m, std::size_t n) {
    if (auto* sp = std::get_if<ScalarProduct>(&e->node)) {
        PowerSum l = reduce_vector_truncated(sp->left, m, n);
        PowerSum r = reduce_vector_truncated(sp->right, m, n);
        return stream_inner(l, r, {n}).front();
    }
    if (auto* me = std::get_if<MatrixElement>(&e->node)) {
        PowerSum l = reduce_vector_truncated(me->bra, m, n);
        PowerSum r = reduce_vector_truncated(apply(me->op, me->ket), m, n);
        return stream_inner(l, r, {n}).front();
    }
    if (auto* sc = std::get_if<Scaled>(&e->node))
        return eval_scalar_truncated(sc->scalar, m, n) * eval_scalar_expr_truncated(sc->term, m, n);
    if (auto* su = std::get_if<Sum>(&e->node)) {
        cplx acc = 0.0;
        for (const auto& t : su->terms) acc += eval_scalar_expr_truncated(t, m, n);
        return acc;
    }
    if (auto* sa = std::get_if<ScalarAtom>(&e->node)) return eval_scalar_truncated(sa->value, m, n);
    if (std::holds_alternative<ReducedMatrixElement>(e->node))
        throw EvalError("reduced matrix elements carry no numeric semantics");
    throw EvalError("expected a scalar-valued expression");
}

inline cplx eval_scalar_truncated(const ScalarPtr& s, const HilbertModel& m, std::size_t n) {
    if (auto* l = std::get_if<ScalarLiteral>(&s->node)) return l->value;
    if (auto* c = std::get_if<ScalarConj>(&s->node))
        return std::conj(eval_scalar_truncated(c->inner, m, n));
    if (auto* t = std::get_if<ScalarTimes>(&s->node)) {
        cplx acc = 1.0;
        for (const auto& f : t->factors) acc *= eval_scalar_truncated(f, m, n);
        return acc;
    }
    return eval_scalar_expr_truncated(std::get<ScalarRef>(s->node).expr, m, n);
}

}  // namespace eval_detail

inline Value evaluate(const ExprPtr& e, const HilbertModel& m, EvalOptions opts = {}) {
    using namespace eval_detail;
    Value out;
    out.forced = opts.force;
    if (m.truncated()) {
        if (!opts.truncation) throw EvalError("truncated model needs a truncation level");
        std::size_t n = *opts.truncation;
        out.truncation = n;
        switch (valence(e)) {
            case Valence::Scalar:
                out.kind = Value::Kind::Scalar;
                out.scalar = eval_scalar_expr_truncated(e, m, n);
                return out;
            case Valence::Vector: {
                out.kind = Value::Kind::Vector;
                PowerSum ps = reduce_vector_truncated(e, m, n);
                out.coeffs.resize(n);
                for (std::size_t k = 1; k <= n; ++k) out.coeffs[k - 1] = power_value(ps, k);
                return out;
            }
            case Valence::CovectorV: {
                const auto& cov = std::get<Covector>(e->node);
                out.kind = Value::Kind::Covector;
                PowerSum ps = reduce_vector_truncated(cov.inner, m, n);
                out.coeffs.resize(n);
                for (std::size_t k = 1; k <= n; ++k)
                    out.coeffs[k - 1] = std::conj(power_value(ps, k));
                return out;
            }
            default: {
                if (auto* oa = std::get_if<OpAtom>(&e->node)) {
                    DiagAction act = op_action_truncated(oa->op, m);
                    if (act.anti)
                        throw EvalError("anti-linear operators have no matrix; evaluate an action");
                    out.kind = Value::Kind::Matrix;
                    out.matrix = zeros(n, n);
                    for (std::size_t k = 0; k < n; ++k)
                        out.matrix[k][k] = std::pow(static_cast<double>(k + 1), act.exponent);
                    return out;
                }
                throw EvalError("operator-valued expressions are not evaluable on truncated models");
            }
        }
    }
    switch (valence(e)) {
        case Valence::Scalar:
            out.kind = Value::Kind::Scalar;
            out.scalar = eval_scalar_expr_finite(e, m);
            return out;
        case Valence::Vector:
            out.kind = Value::Kind::Vector;
            out.coeffs = eval_vector_finite(e, m);
            return out;
        case Valence::CovectorV: {
            const auto& cov = std::get<Covector>(e->node);
            out.kind = Value::Kind::Covector;
            out.coeffs = repfree::conj(eval_vector_finite(cov.inner, m));
            return out;
        }
        default: {
            out.kind = Value::Kind::Matrix;
            if (auto* o = std::get_if<OuterProduct>(&e->node)) {
                out.matrix = rank_one(eval_vector_finite(o->ket, m), eval_vector_finite(o->bra, m));
                return out;
            }
            if (auto* sc = std::get_if<Scaled>(&e->node)) {
                Value inner = evaluate(sc->term, m, opts);
                out.matrix = mat_scale(eval_scalar_finite(sc->scalar, m), inner.matrix);
                return out;
            }
            if (auto* su = std::get_if<Sum>(&e->node)) {
                for (const auto& t : su->terms) {
                    Value v = evaluate(t, m, opts);
                    out.matrix = out.matrix.empty() ? v.matrix : mat_add(out.matrix, v.matrix);
                }
                return out;
            }
            const auto& oa = std::get<OpAtom>(e->node);
            Action a = op_action_finite(oa.op, m);
            if (a.anti)
                throw EvalError("anti-linear operators have no matrix; evaluate an action "
                                "or use the adjoint");
            out.matrix = a.lin;
            return out;
        }
    }
}

// ---- Riesz representation -----------------------------------------------------

struct RieszResult {
    cvec representing;  // u with F(.) = (u, .)
    double residual;    // max_k |F(e_k) - (u, e_k)|
};

// Representing vector of a bounded functional given by its values on an
// orthonormal basis: u = sum_k conj(F(e_k)) e_k.
inline RieszResult riesz_solve(const HilbertModel& m, const cvec& functional_values,
                               const std::string& basis = "") {
    if (m.truncated()) throw EvalError("riesz_solve needs a finite model");
    std::vector<cvec> bs = basis_vectors(m, basis);
    if (functional_values.size() != bs.size())
        throw EvalError("functional values must match the basis size");
    for (std::size_t i = 0; i < bs.size(); ++i)
        for (std::size_t j = 0; j < bs.size(); ++j) {
            double want = i == j ? 1.0 : 0.0;
            if (std::abs(inner(bs[i], bs[j]) - want) > 1e-10)
                throw EvalError("riesz_solve needs an orthonormal basis");
        }
    cvec u(m.dim, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < bs.size(); ++k)
        u = add(u, scale(std::conj(functional_values[k]), bs[k]));
    double residual = 0.0;
    for (std::size_t k = 0; k < bs.size(); ++k)
        residual = std::max(residual, std::abs(functional_values[k] - inner(u, bs[k])));
    return {std::move(u), residual};
}

// ---- truncation sweeps ----------------------------------------------------------

struct SweepReport {
    std::vector<std::size_t> levels;
    std::vector<double> magnitudes;
    enum class Verdict { Convergent, Divergent, Inconclusive } verdict = Verdict::Inconclusive;
    double fitted_exponent = 0.0;  // least-squares log-log slope
};

namespace eval_detail {

inline void classify(SweepReport& r, double cauchy_tol = 1e-8, double slope_threshold = 0.05) {
    const auto& v = r.magnitudes;
    if (v.size() < 2) return;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t k = v.size();
    for (std::size_t i = 0; i < k; ++i) {
        double x = std::log(static_cast<double>(r.levels[i]));
        double y = std::log(std::max(v[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    r.fitted_exponent = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < k; ++i)
        if (v[i + 1] < v[i] * (1.0 - 1e-12)) monotone = false;
    if (monotone && r.fitted_exponent > slope_threshold) {
        r.verdict = SweepReport::Verdict::Divergent;
    } else if (std::abs(v[k - 1] - v[k - 2]) < cauchy_tol) {
        r.verdict = SweepReport::Verdict::Convergent;
    } else {
        r.verdict = SweepReport::Verdict::Inconclusive;
    }
}

inline void require_levels(const std::vector<std::size_t>& levels) {
    if (levels.size() < 2) throw EvalError("a sweep needs at least two truncation levels");
    for (std::size_t i = 0; i + 1 < levels.size(); ++i)
        if (levels[i + 1] <= levels[i]) throw EvalError("truncation levels must be increasing");
}

}  // namespace eval_detail

// sup over normalized basis states of |(u, O e_n)| = max_{n<=N} |lambda_n u_n|:
// the growth of an unbounded functional under truncation.
inline SweepReport unboundedness_probe(const HilbertModel& m, const std::string& state,
                                       const std::string& op,
                                       const std::vector<std::size_t>& levels) {
    if (!m.truncated()) throw EvalError("unboundedness_probe needs a truncated model");
    eval_detail::require_levels(levels);
    const StateDef& st = m.state(state);
    const OperatorSpec& spec = m.op(op);
    if (!spec.diagonal) throw EvalError("unboundedness_probe needs a diagonal operator");
    SweepReport r;
    r.levels = levels;
    double sup = 0.0;
    std::size_t next = 0;
    for (std::size_t n = 1; next < levels.size(); ++n) {
        sup = std::max(sup, std::abs(spec.eigenvalue(n)) * std::abs(st.coeff(n)));
        while (next < levels.size() && n == levels[next]) {
            r.magnitudes.push_back(sup);
            ++next;
        }
    }
    eval_detail::classify(r);
    return r;
}

// Norm of the N-truncation of a diagonal operator: max_{n<=N} |lambda_n|.
// For lambda_n = n^p with p > 0 the truncations are everywhere-defined but
// their norms grow without bound.
inline SweepReport operator_norm_sweep(const HilbertModel& m, const std::string& op,
                                       const std::vector<std::size_t>& levels) {
    if (!m.truncated()) throw EvalError("operator_norm_sweep needs a truncated model");
    eval_detail::require_levels(levels);
    const OperatorSpec& spec = m.op(op);
    if (!spec.diagonal) throw EvalError("operator_norm_sweep needs a diagonal operator");
    SweepReport r;
    r.levels = levels;
    double sup = 0.0;
    std::size_t next = 0;
    for (std::size_t n = 1; next < levels.size(); ++n) {
        sup = std::max(sup, std::abs(spec.eigenvalue(n)));
        while (next < levels.size() && n == levels[next]) {
            r.magnitudes.push_back(sup);
            ++next;
        }
    }
    eval_detail::classify(r);
    return r;
}

// Evaluates a scalar-valued expression at each truncation level. Scalar
// products and matrix elements stream in one pass over n; compound scalar
// expressions fall back to one evaluation per level.
inline SweepReport truncation_sweep(const ExprPtr& e, const HilbertModel& m,
                                    const std::vector<std::size_t>& levels) {
    using namespace eval_detail;
    if (!m.truncated()) throw EvalError("truncation_sweep needs a truncated model");
    require_levels(levels);
    if (valence(e) != Valence::Scalar)
        throw EvalError("truncation_sweep needs a scalar-valued expression");
    SweepReport r;
    r.levels = levels;
    PowerSum l, rt;
    bool streamed = false;
    if (auto* sp = std::get_if<ScalarProduct>(&e->node)) {
        l = reduce_vector_truncated(sp->left, m, levels.back());
        rt = reduce_vector_truncated(sp->right, m, levels.back());
        streamed = true;
    } else if (auto* me = std::get_if<MatrixElement>(&e->node)) {
        l = reduce_vector_truncated(me->bra, m, levels.back());
        rt = reduce_vector_truncated(apply(me->op, me->ket), m, levels.back());
        streamed = true;
    }
    if (streamed) {
        for (const cplx& v : stream_inner(l, rt, levels)) r.magnitudes.push_back(std::abs(v));
    } else {
        for (std::size_t n : levels)
            r.magnitudes.push_back(std::abs(eval_scalar_expr_truncated(e, m, n)));
    }
    classify(r);
    return r;
}

inline const char* verdict_word(SweepReport::Verdict v) {
    switch (v) {
        case SweepReport::Verdict::Convergent: return "convergent";
        case SweepReport::Verdict::Divergent: return "divergent";
        default: return "inconclusive";
    }
}

// Two-column table plus the verdict line; `sep` switches to plot-data
// delimiter-separated output.
inline std::string sweep_table(const SweepReport& r, char sep = ' ', bool verdict_line = true) {
    std::string out = std::string("N") + sep + "value\n";
    char buf[64];
    for (std::size_t i = 0; i < r.levels.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu%c%.12g\n", r.levels[i], sep, r.magnitudes[i]);
        out += buf;
    }
    if (verdict_line) {
        std::snprintf(buf, sizeof buf, "verdict: %s (fitted exponent %.4g)\n",
                      verdict_word(r.verdict), r.fitted_exponent);
        out += buf;
    }
    return out;
}

}  // namespace repfree
