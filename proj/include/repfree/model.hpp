// Concrete inner-product-space models: finite-dimensional explicit models
// and truncated countable-basis models with power-law states u_n = n^-q and
// diagonal operators lambda_n = n^p. The truncated family is the smallest
// one where domain membership is analytically decidable: u is in D(O) iff
// sum n^{2p-2q} converges, i.e. 2(q-p) > 1.
//
// Models are immutable after load_model; checker and evaluator share them
// concurrently without synchronization.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "complex_linalg.hpp"

namespace repfree {

enum class Linearity { Linear, AntiLinear };
enum class Membership { In, Out, Unknown };
enum class PhaseRule { None, Alternating };

struct ModelError : std::runtime_error {
    ModelError(const std::string& msg, int line = 0, std::string rule_name = "", int col = 1)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ":" +
                                            std::to_string(col) + ": " + msg
                                      : msg),
          line_number(line),
          column(col),
          rule(std::move(rule_name)) {}
    int line_number;
    int column;
    std::string rule;  // named invariant when the failure is a rule violation
};

struct StateDef {
    std::string label;
    cvec coeffs;                        // finite models
    double decay = 0.0;                 // truncated: coeff(n) = n^-decay * phase(n)
    PhaseRule phase = PhaseRule::None;

    // Finite coefficient vectors always have finite norm; a power-law rule
    // needs 2q > 1.
    bool norm_finite(bool truncated) const {
        return truncated ? 2.0 * decay > 1.0 : true;
    }
    cplx coeff(std::size_t n) const {  // 1-based, truncated rule
        double mag = std::pow(static_cast<double>(n), -decay);
        if (phase == PhaseRule::Alternating && n % 2 == 0) mag = -mag;
        return cplx(mag, 0.0);
    }
};

// A linear functional given by its values on the reference basis. Bounded
// iff the value sequence is square-summable; unbounded functionals are the
// checker's FN1 counterexamples and have no representing vector.
struct FunctionalDef {
    std::string label;
    cvec values;                 // finite models: F(e_k)
    double growth = 0.0;         // truncated: F(e_n) = n^-growth
    bool power_law = false;

    bool bounded() const { return power_law ? 2.0 * growth > 1.0 : true; }
    cplx value(std::size_t n) const {
        return cplx(std::pow(static_cast<double>(n), -growth), 0.0);
    }
};

struct OperatorSpec {
    std::string symbol;
    Linearity linearity = Linearity::Linear;
    cmat matrix;                 // finite models
    double diag_exponent = 0.0;  // truncated: lambda_n = n^p
    bool diagonal = false;
    std::optional<std::string> declared_adjoint;

    double eigenvalue(std::size_t n) const {
        return std::pow(static_cast<double>(n), diag_exponent);
    }
};

struct DomainFact {
    std::string state_label;
    std::string operator_symbol;
    bool daggered = false;
    Membership membership = Membership::Unknown;
    enum class Provenance { Declared, DerivedPowerLaw } provenance = Provenance::DerivedPowerLaw;
};

struct BasisDef {
    std::string name;
    std::vector<std::string> states;  // ordered labels, empty when generated
    bool standard_generator = false;  // canonical basis e_n
};

struct HilbertModel {
    enum class Kind { Finite, Truncated };

    Kind kind = Kind::Finite;
    std::size_t dim = 0;                 // finite
    std::vector<std::size_t> levels;     // truncated: default sweep levels
    std::map<std::string, StateDef> states;
    std::map<std::string, OperatorSpec> operators;
    std::map<std::string, BasisDef> bases;
    std::map<std::string, FunctionalDef> functionals;
    std::vector<DomainFact> domain_facts;

    bool truncated() const { return kind == Kind::Truncated; }

    const StateDef& state(const std::string& label) const {
        auto it = states.find(label);
        if (it == states.end()) throw ModelError("unknown state label '" + label + "'");
        return it->second;
    }
    const OperatorSpec& op(const std::string& symbol) const {
        auto it = operators.find(symbol);
        if (it == operators.end()) throw ModelError("unknown operator symbol '" + symbol + "'");
        return it->second;
    }
    bool has_state(const std::string& label) const { return states.count(label) != 0; }
    bool has_operator(const std::string& symbol) const { return operators.count(symbol) != 0; }
    bool has_functional(const std::string& label) const { return functionals.count(label) != 0; }

    // Coefficients of a state (or of the representing vector of a bounded
    // functional) in the reference basis, truncated to n for truncated models.
    cvec state_coeffs(const std::string& label, std::size_t n) const {
        if (auto it = states.find(label); it != states.end()) {
            if (!truncated()) return it->second.coeffs;
            cvec v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = it->second.coeff(i + 1);
            return v;
        }
        if (auto it = functionals.find(label); it != functionals.end()) {
            // Riesz correspondence: u_k = conj(F(e_k)).
            if (!truncated()) return repfree::conj(it->second.values);
            cvec v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = std::conj(it->second.value(i + 1));
            return v;
        }
        throw ModelError("unknown state label '" + label + "'");
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return "";
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_real(const std::string& s, int line, int col = 1) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ModelError("malformed number '" + s + "'", line, "", col);
    }
}

// "(re,im)" pairs, comma separated: "(1,0), (0,-0.5)"
inline cvec parse_complex_list(const std::string& s, int line, int col = 1) {
    cvec out;
    std::size_t i = 0;
    auto here = [&] { return col + static_cast<int>(i); };
    auto skip_ws = [&] { while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i; };
    while (true) {
        skip_ws();
        if (i >= s.size()) break;
        if (s[i] != '(') throw ModelError("expected '(' in coefficient list", line, "", here());
        auto close = s.find(')', i);
        if (close == std::string::npos)
            throw ModelError("unterminated '(' in coefficient list", line, "", here());
        std::string body = s.substr(i + 1, close - i - 1);
        auto comma = body.find(',');
        if (comma == std::string::npos)
            throw ModelError("expected '(re,im)' pair", line, "", here());
        out.emplace_back(parse_real(trim(body.substr(0, comma)), line, here()),
                         parse_real(trim(body.substr(comma + 1)), line, here()));
        i = close + 1;
        skip_ws();
        if (i < s.size()) {
            if (s[i] != ',')
                throw ModelError("expected ',' between coefficients", line, "", here());
            ++i;
        }
    }
    if (out.empty()) throw ModelError("empty coefficient list", line, "", col);
    return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(trim(cur));
    return parts;
}

}  // namespace detail

// Analytic domain rule for the power-law family. Phases never affect
// membership; daggered is immaterial for real diagonal rules, which are
// self-adjoint, so D(O) = D(O').
inline Membership power_law_membership(double q, double p) {
    return 2.0 * (q - p) > 1.0 ? Membership::In : Membership::Out;
}

// Parses the line-oriented model-file format. Sections: [space],
// [state <label>], [operator <symbol>], [basis <name>], [functional <name>],
// [domain]. '#' starts a comment. Fails with line numbers and, for
// invariant violations, a named rule.
inline HilbertModel load_model(std::string_view text) {
    HilbertModel m;
    bool kind_set = false;
    std::string section, section_arg;
    struct Override { std::string state, op; bool daggered; Membership membership; };
    std::vector<Override> overrides;

    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::string line = detail::trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ModelError("unterminated section header", lineno);
            std::string head = detail::trim(line.substr(1, line.size() - 2));
            auto sp = head.find(' ');
            section = sp == std::string::npos ? head : head.substr(0, sp);
            section_arg = sp == std::string::npos ? "" : detail::trim(head.substr(sp + 1));
            if (section == "state") {
                if (section_arg.empty()) throw ModelError("state section needs a label", lineno);
                m.states[section_arg].label = section_arg;
            } else if (section == "operator") {
                if (section_arg.empty()) throw ModelError("operator section needs a symbol", lineno);
                m.operators[section_arg].symbol = section_arg;
            } else if (section == "basis") {
                if (section_arg.empty()) throw ModelError("basis section needs a name", lineno);
                m.bases[section_arg].name = section_arg;
            } else if (section == "functional") {
                if (section_arg.empty()) throw ModelError("functional section needs a name", lineno);
                m.functionals[section_arg].label = section_arg;
            } else if (section != "space" && section != "domain") {
                throw ModelError("unknown section '" + section + "'", lineno);
            }
            continue;
        }

        if (section == "domain") {
            auto parts = detail::split(line, ' ');
            std::vector<std::string> tok;
            for (auto& p : parts)
                if (!p.empty()) tok.push_back(p);
            if (tok.size() != 3) throw ModelError("domain override must be '<in|out|unknown> <state> <op>'", lineno);
            Membership mem;
            if (tok[0] == "in") mem = Membership::In;
            else if (tok[0] == "out") mem = Membership::Out;
            else if (tok[0] == "unknown") mem = Membership::Unknown;
            else throw ModelError("domain override verdict must be in, out or unknown", lineno);
            std::string opname = tok[2];
            bool daggered = false;
            if (opname.rfind("dag(", 0) == 0 && opname.back() == ')') {
                daggered = true;
                opname = opname.substr(4, opname.size() - 5);
            }
            overrides.push_back({tok[1], opname, daggered, mem});
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string::npos) throw ModelError("expected 'key = value'", lineno);
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        // column of the value in the original line, for error reporting
        int vcol = 1;
        if (auto raw_eq = raw.find('='); raw_eq != std::string::npos) {
            auto v = raw.find_first_not_of(" \t", raw_eq + 1);
            vcol = static_cast<int>((v == std::string::npos ? raw_eq + 1 : v) + 1);
        }

        if (section == "space") {
            if (key == "kind") {
                if (value == "finite") m.kind = HilbertModel::Kind::Finite;
                else if (value == "truncated") m.kind = HilbertModel::Kind::Truncated;
                else throw ModelError("kind must be finite or truncated", lineno);
                kind_set = true;
            } else if (key == "dim") {
                long d = static_cast<long>(detail::parse_real(value, lineno, vcol));
                if (d <= 0) throw ModelError("dim must be a positive integer", lineno);
                m.dim = static_cast<std::size_t>(d);
            } else if (key == "levels") {
                for (auto& p : detail::split(value, ',')) {
                    long n = static_cast<long>(detail::parse_real(p, lineno, vcol));
                    if (n <= 0) throw ModelError("truncation levels must be positive", lineno);
                    m.levels.push_back(static_cast<std::size_t>(n));
                }
            } else {
                throw ModelError("unknown key '" + key + "' in [space]", lineno);
            }
        } else if (section == "state") {
            StateDef& st = m.states[section_arg];
            if (key == "coeffs") st.coeffs = detail::parse_complex_list(value, lineno, vcol);
            else if (key == "decay q") st.decay = detail::parse_real(value, lineno, vcol);
            else if (key == "phase") {
                if (value == "none") st.phase = PhaseRule::None;
                else if (value == "alternating") st.phase = PhaseRule::Alternating;
                else throw ModelError("phase must be none or alternating", lineno);
            } else throw ModelError("unknown key '" + key + "' in [state]", lineno);
        } else if (section == "operator") {
            OperatorSpec& op = m.operators[section_arg];
            if (key == "matrix") {
                op.matrix.clear();
                for (auto& row : detail::split(value, ';'))
                    op.matrix.push_back(detail::parse_complex_list(row, lineno, vcol));
            } else if (key == "diagonal p") {
                op.diagonal = true;
                op.diag_exponent = detail::parse_real(value, lineno, vcol);
            } else if (key == "antilinear") {
                if (value == "true") op.linearity = Linearity::AntiLinear;
                else if (value == "false") op.linearity = Linearity::Linear;
                else throw ModelError("antilinear must be true or false", lineno);
            } else if (key == "adjoint") {
                op.declared_adjoint = value;
            } else throw ModelError("unknown key '" + key + "' in [operator]", lineno);
        } else if (section == "basis") {
            BasisDef& b = m.bases[section_arg];
            if (key == "states") {
                for (auto& p : detail::split(value, ','))
                    if (!p.empty()) b.states.push_back(p);
            } else if (key == "generator") {
                if (value != "standard")
                    throw ModelError("only the standard generator rule is supported", lineno);
                b.standard_generator = true;
            } else throw ModelError("unknown key '" + key + "' in [basis]", lineno);
        } else if (section == "functional") {
            FunctionalDef& f = m.functionals[section_arg];
            if (key == "values") {
                f.values = detail::parse_complex_list(value, lineno, vcol);
            } else if (key == "values q") {
                f.power_law = true;
                f.growth = detail::parse_real(value, lineno, vcol);
            } else throw ModelError("unknown key '" + key + "' in [functional]", lineno);
        } else {
            throw ModelError("key outside of any section", lineno);
        }
    }

    if (!kind_set) throw ModelError("[space] must declare kind = finite | truncated");

    // Validation and derived facts.
    if (m.kind == HilbertModel::Kind::Finite) {
        if (m.dim == 0) throw ModelError("finite model needs dim");
        for (auto& [label, st] : m.states) {
            if (st.coeffs.size() != m.dim)
                throw ModelError("state '" + label + "' has " + std::to_string(st.coeffs.size()) +
                                     " coefficients, expected " + std::to_string(m.dim),
                                 0, "coeff-length");
        }
        for (auto& [sym, op] : m.operators) {
            if (op.diagonal)
                throw ModelError("finite operators must use matrix = ...", 0, "operator-shape");
            if (op.matrix.size() != m.dim)
                throw ModelError("operator '" + sym + "' matrix is not " + std::to_string(m.dim) +
                                     "x" + std::to_string(m.dim),
                                 0, "operator-shape");
            for (const auto& row : op.matrix)
                if (row.size() != m.dim)
                    throw ModelError("operator '" + sym + "' matrix is ragged", 0, "operator-shape");
        }
        for (auto& [label, f] : m.functionals) {
            if (f.power_law)
                throw ModelError("finite functionals must use values = ...", 0, "functional-shape");
            if (f.values.size() != m.dim)
                throw ModelError("functional '" + label + "' has wrong length", 0, "functional-shape");
        }
        for (auto& [name, b] : m.bases) {
            if (b.standard_generator) continue;
            for (std::size_t i = 0; i < b.states.size(); ++i) {
                const auto& ui = m.state(b.states[i]).coeffs;
                for (std::size_t j = 0; j < b.states.size(); ++j) {
                    cplx g = inner(ui, m.state(b.states[j]).coeffs);
                    double want = i == j ? 1.0 : 0.0;
                    if (std::abs(g - want) > 1e-10)
                        throw ModelError("basis '" + name + "' is not orthonormal", 0,
                                         "basis-orthonormality");
                }
            }
        }
    } else {
        for (auto& [label, st] : m.states) {
            if (!st.coeffs.empty())
                throw ModelError("truncated states must use decay q = ...", 0, "state-shape");
            if (!st.norm_finite(true))
                throw ModelError("state '" + label +
                                     "' has no finite norm (needs 2q > 1) but is declared as a state vector",
                                 0, "finite-norm");
        }
        for (auto& [sym, op] : m.operators) {
            if (!op.diagonal)
                throw ModelError("truncated operators must use diagonal p = ...", 0, "operator-shape");
        }
        if (m.levels.empty()) m.levels = {16, 256, 4096};
    }

    // declared_adjoint must name an existing operator that actually is the
    // adjoint of the declaring one.
    for (auto& [sym, op] : m.operators) {
        if (!op.declared_adjoint) continue;
        auto it = m.operators.find(*op.declared_adjoint);
        if (it == m.operators.end())
            throw ModelError("declared adjoint '" + *op.declared_adjoint + "' of '" + sym +
                                 "' is not a declared operator",
                             0, "declared-adjoint");
        const OperatorSpec& adj = it->second;
        if (m.kind == HilbertModel::Kind::Finite) {
            if (op.linearity == Linearity::Linear) {
                if (max_abs_diff(adj.matrix, dagger(op.matrix)) > 1e-10)
                    throw ModelError("declared adjoint of '" + sym + "' does not match its conjugate transpose",
                                     0, "declared-adjoint");
            } else {
                if (max_abs_diff(adj.matrix, transpose(op.matrix)) > 1e-10)
                    throw ModelError("declared adjoint of anti-linear '" + sym + "' does not match",
                                     0, "declared-adjoint");
            }
        } else if (adj.diag_exponent != op.diag_exponent) {
            throw ModelError("declared adjoint of diagonal '" + sym + "' must share its exponent",
                             0, "declared-adjoint");
        }
    }

    // Derived power-law facts for every declared (state, operator) pair,
    // both plain and daggered; declared overrides win.
    if (m.truncated()) {
        for (auto& [slabel, st] : m.states)
            for (auto& [osym, op] : m.operators)
                for (bool dag : {false, true})
                    m.domain_facts.push_back({slabel, osym, dag,
                                              power_law_membership(st.decay, op.diag_exponent),
                                              DomainFact::Provenance::DerivedPowerLaw});
    }
    for (const auto& o : overrides) {
        if (!m.has_state(o.state)) throw ModelError("domain override for unknown state '" + o.state + "'");
        if (!m.has_operator(o.op)) throw ModelError("domain override for unknown operator '" + o.op + "'");
        bool replaced = false;
        for (auto& f : m.domain_facts) {
            if (f.state_label == o.state && f.operator_symbol == o.op && f.daggered == o.daggered) {
                f.membership = o.membership;
                f.provenance = DomainFact::Provenance::Declared;
                replaced = true;
            }
        }
        if (!replaced)
            m.domain_facts.push_back({o.state, o.op, o.daggered, o.membership,
                                      DomainFact::Provenance::Declared});
    }
    return m;
}

// Finite models are vacuously "in": every operator is everywhere-defined.
inline Membership domain_membership(const HilbertModel& m, const std::string& state,
                                    const std::string& op, bool daggered) {
    if (!m.has_state(state)) throw ModelError("unknown state label '" + state + "'");
    (void)m.op(op);
    if (!m.truncated()) return Membership::In;
    for (const auto& f : m.domain_facts)
        if (f.state_label == state && f.operator_symbol == op && f.daggered == daggered)
            return f.membership;
    return Membership::Unknown;
}

// <u,v> = sum conj(u_n) v_n; anti-linear in the left slot. Truncated models
// need an explicit truncation level.
inline cplx inner_product(const HilbertModel& m, const std::string& u, const std::string& v,
                          std::optional<std::size_t> truncation = std::nullopt) {
    if (!m.truncated()) return inner(m.state_coeffs(u, m.dim), m.state_coeffs(v, m.dim));
    if (!truncation) throw ModelError("truncated model needs a truncation level");
    const StateDef& su = m.state(u);
    const StateDef& sv = m.state(v);
    cplx acc = 0.0;
    for (std::size_t n = 1; n <= *truncation; ++n) acc += std::conj(su.coeff(n)) * sv.coeff(n);
    return acc;
}

// Anti-linear operators conjugate coefficients before their linear part.
inline cvec apply_operator_coeffs(const HilbertModel& m, const OperatorSpec& op, cvec in) {
    if (op.linearity == Linearity::AntiLinear) in = repfree::conj(in);
    if (!m.truncated()) return matvec(op.matrix, in);
    for (std::size_t i = 0; i < in.size(); ++i) in[i] *= op.eigenvalue(i + 1);
    return in;
}

inline cvec apply_operator(const HilbertModel& m, const std::string& op, const std::string& state,
                           std::optional<std::size_t> truncation = std::nullopt) {
    const OperatorSpec& spec = m.op(op);
    if (m.truncated() && !truncation) throw ModelError("truncated model needs a truncation level");
    return apply_operator_coeffs(m, spec, m.state_coeffs(state, m.truncated() ? *truncation : m.dim));
}

// Matrix of the adjoint. For linear O this is the conjugate transpose; for
// anti-linear O with action u -> M conj(u), the adjoint is anti-linear with
// linear part M^T, which is what (O'u, v) = conj((u, Ov)) forces.
inline cmat adjoint_matrix(const HilbertModel& m, const std::string& op,
                           std::optional<std::size_t> truncation = std::nullopt) {
    const OperatorSpec& spec = m.op(op);
    if (!m.truncated())
        return spec.linearity == Linearity::Linear ? dagger(spec.matrix) : transpose(spec.matrix);
    if (!truncation) throw ModelError("truncated model needs a truncation level");
    cmat d = zeros(*truncation, *truncation);
    for (std::size_t i = 0; i < *truncation; ++i) d[i][i] = spec.eigenvalue(i + 1);
    return d;  // real diagonal rules are self-adjoint
}

// Coefficient vectors of a declared basis (or the standard basis).
inline std::vector<cvec> basis_vectors(const HilbertModel& m, const std::string& name) {
    if (m.truncated()) throw ModelError("basis expansion needs a finite model");
    if (name.empty()) {
        std::vector<cvec> out;
        for (std::size_t i = 0; i < m.dim; ++i) {
            cvec e(m.dim, cplx(0.0, 0.0));
            e[i] = 1.0;
            out.push_back(std::move(e));
        }
        return out;
    }
    auto it = m.bases.find(name);
    if (it == m.bases.end()) throw ModelError("unknown basis '" + name + "'");
    if (it->second.standard_generator) return basis_vectors(m, "");
    std::vector<cvec> out;
    for (const auto& label : it->second.states) out.push_back(m.state(label).coeffs);
    return out;
}

}  // namespace repfree
