// Tokenizes and parses both surface notations into the shared Expr tree,
// with byte-precise source spans for diagnostics.
//
// Slash grammar: states /label/, infix scalar-product dot, trailing dot for
// covectors and projection-type operators, '^' (alias '/\', unicode
// U+2227) as the delimiting sign, dag(O) for adjoints (postfix U+2020
// accepted), dotless matrix elements /u/O/v/, reduced matrix elements
// /a//O//b/. Bra-ket grammar: |u>, <u|, <u|v>, <u|O|v>, |u><v|, <u|O,
// parenthesized left/right action forms, reduced <a||O||b>. Mixing
// notations in one expression is an error; '^' is rejected inside bra-ket.
#pragma once

#include <cctype>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ast.hpp"

namespace repfree {

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, SourceSpan sp, std::vector<std::string> expect = {})
        : std::runtime_error(msg), span(sp), expected(std::move(expect)) {}
    SourceSpan span;
    std::vector<std::string> expected;  // expected-token set, when known
};

enum class ParseHint { Auto, Slash, Braket };

struct ParseResult {
    ExprPtr expr;
    Notation notation = Notation::Slash;
    std::vector<std::string> warnings;
};

namespace parse_detail {

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

class Parser {
public:
    Parser(std::string_view text, std::size_t line_base) : text_(text), line_(line_base) {}

    ExprPtr run(Notation n) {
        notation_ = n;
        skip_ws();
        if (at_end()) fail("empty input");
        ExprPtr e = parse_sum();
        skip_ws();
        if (!at_end()) fail("unexpected trailing input");
        return e;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
    Notation notation_ = Notation::Slash;

    // ---- cursor helpers ----
    bool at_end() const { return pos_ >= text_.size(); }
    char peek(std::size_t off = 0) const {
        return pos_ + off < text_.size() ? text_[pos_ + off] : '\0';
    }
    void advance(std::size_t n = 1) {
        for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
            if (text_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
            ++pos_;
        }
    }
    void skip_ws() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) advance();
    }
    SourceSpan here() const { return {pos_, pos_ + 1, line_, col_}; }
    SourceSpan span_from(std::size_t start, std::size_t start_col) const {
        return {start, pos_, line_, start_col};
    }
    [[noreturn]] void fail(const std::string& msg, std::vector<std::string> expect = {}) const {
        throw ParseError(msg, here(), std::move(expect));
    }

    // Unicode aliases: U+2227 for '^', U+2020 for dag().
    bool peek_utf8(const char* seq) const {
        std::string_view rest = text_.substr(pos_);
        return rest.rfind(seq, 0) == 0;
    }
    bool peek_delim() const {
        if (peek() == '^') return true;
        if (peek() == '/' && peek(1) == '\\') return true;
        return peek_utf8("\xe2\x88\xa7");
    }
    void eat_delim() {
        if (peek() == '^') advance();
        else if (peek() == '/' && peek(1) == '\\') advance(2);
        else advance(3);
    }
    bool peek_postfix_dagger() const { return peek_utf8("\xe2\x80\xa0"); }

    void check_mixed() const {
        char c = peek();
        if (notation_ == Notation::Slash && (c == '<' || c == '|' || c == '>'))
            fail("mixed notation: bra-ket token inside a slash expression");
        if (notation_ == Notation::Braket && c == '/')
            fail("mixed notation: slash token inside a bra-ket expression");
    }

    // ---- scalar literals ----
    // "(re+imi)" / "(re-imi)" recognized wholesale at '('; bare reals too.
    std::optional<double> scan_real(std::size_t& p) const {
        std::size_t q = p;
        if (q < text_.size() && (text_[q] == '+' || text_[q] == '-')) ++q;
        std::size_t digits = q;
        while (q < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[q])) || text_[q] == '.'))
            ++q;
        if (q == digits) return std::nullopt;
        if (q < text_.size() && (text_[q] == 'e' || text_[q] == 'E')) {
            std::size_t r = q + 1;
            if (r < text_.size() && (text_[r] == '+' || text_[r] == '-')) ++r;
            std::size_t ed = r;
            while (r < text_.size() && std::isdigit(static_cast<unsigned char>(text_[r]))) ++r;
            if (r > ed) q = r;
        }
        double v = std::strtod(std::string(text_.substr(p, q - p)).c_str(), nullptr);
        p = q;
        return v;
    }

    std::optional<std::pair<cplx_t, std::size_t>> try_scan_complex() const {
        if (peek() != '(') return std::nullopt;
        std::size_t p = pos_ + 1;
        auto ws = [&] {
            while (p < text_.size() && std::isspace(static_cast<unsigned char>(text_[p]))) ++p;
        };
        ws();
        auto re = scan_real(p);
        if (!re) return std::nullopt;
        ws();
        if (p >= text_.size() || (text_[p] != '+' && text_[p] != '-')) return std::nullopt;
        auto im = scan_real(p);
        if (!im) return std::nullopt;
        if (p >= text_.size() || text_[p] != 'i') return std::nullopt;
        ++p;
        ws();
        if (p >= text_.size() || text_[p] != ')') return std::nullopt;
        ++p;
        return std::make_pair(cplx_t(*re, *im), p - pos_);
    }

    bool scalar_ahead() const {
        char c = peek();
        if (std::isdigit(static_cast<unsigned char>(c))) return true;
        if (c == '(' && try_scan_complex()) return true;
        if (ident_start(c)) {
            std::size_t p = pos_;
            while (p < text_.size() && ident_char(text_[p])) ++p;
            return text_.compare(pos_, p - pos_, "conj") == 0 && p < text_.size() &&
                   text_[p] == '(';
        }
        return false;
    }

    ScalarPtr parse_scalar_factor() {
        skip_ws();
        char c = peek();
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t p = pos_;
            auto v = scan_real(p);
            advance(p - pos_);
            return lit(cplx_t(*v, 0.0));
        }
        if (c == '(') {
            auto cx = try_scan_complex();
            if (!cx) fail("expected complex literal");
            advance(cx->second);
            return lit(cx->first);
        }
        // conj( ... )
        std::string id = scan_ident();
        if (id != "conj") fail("expected scalar literal or conj(...)");
        skip_ws();
        if (peek() != '(') fail("expected '(' after conj");
        advance();
        skip_ws();
        ExprPtr e = parse_sum();
        if (valence(e) != Valence::Scalar) fail("conj needs a scalar-valued argument");
        ScalarPtr inner;
        if (auto* sa = std::get_if<ScalarAtom>(&e->node)) inner = sa->value;
        else inner = scalar_ref(e);
        skip_ws();
        if (peek() != ')') fail("expected ')'", {")"});
        advance();
        return conj_scalar(inner);
    }

    std::string scan_ident() {
        if (!ident_start(peek())) fail("expected identifier");
        std::size_t start = pos_;
        while (!at_end() && ident_char(peek())) advance();
        return std::string(text_.substr(start, pos_ - start));
    }

    // ---- operator chains (shared by both notations) ----
    bool opchain_ahead() const {
        if (!ident_start(peek())) return false;
        std::size_t p = pos_;
        while (p < text_.size() && ident_char(text_[p])) ++p;
        // conj( starts a scalar, never an operator
        return !(text_.compare(pos_, p - pos_, "conj") == 0 && p < text_.size() && text_[p] == '(');
    }

    OpPtr parse_op_factor() {
        std::string id = scan_ident();
        OpPtr f;
        if (id == "dag") {
            skip_ws();
            if (peek() != '(') fail("expected '(' after dag");
            advance();
            skip_ws();
            OpPtr inner;
            if (peek() == '/') {
                ExprPtr e = parse_sum();  // operator-valued slash expression
                if (auto* o = std::get_if<OuterProduct>(&e->node)) inner = op_outer(o->ket, o->bra);
                else if (auto* oa = std::get_if<OpAtom>(&e->node)) inner = oa->op;
                else fail("dag(...) needs an operator-valued argument");
            } else if (opchain_ahead()) {
                inner = parse_opchain();
            } else {
                fail("dag(...) needs an operator-valued argument");
            }
            skip_ws();
            if (peek() != ')') fail("expected ')'", {")"});
            advance();
            f = op_dagger(inner);
        } else if (id == "conj") {
            fail("conj(...) is a scalar, not an operator");
        } else if (id == "I") {
            std::string basis;
            if (peek() == '[') {
                advance();
                std::size_t start = pos_;
                while (!at_end() && peek() != ']') advance();
                if (at_end()) fail("unterminated basis name");
                basis = std::string(text_.substr(start, pos_ - start));
                advance();
            }
            f = op_identity(basis);
        } else {
            f = op_symbol(id);
        }
        while (peek_postfix_dagger()) {
            advance(3);
            f = op_dagger(f);
        }
        return f;
    }

    OpPtr parse_opchain() {
        std::vector<OpPtr> factors;
        while (true) {
            skip_ws();
            if (!opchain_ahead()) break;
            factors.push_back(parse_op_factor());
        }
        if (factors.empty()) fail("expected operator symbol");
        return op_compose(std::move(factors));
    }

    // =======================================================================
    // slash notation
    // =======================================================================

    ExprPtr parse_sum() {
        std::vector<ExprPtr> terms;
        terms.push_back(notation_ == Notation::Slash ? parse_chain() : parse_bk_term());
        while (true) {
            skip_ws();
            if (peek() != '+') break;
            advance();
            skip_ws();
            terms.push_back(notation_ == Notation::Slash ? parse_chain() : parse_bk_term());
            if (valence(terms.back()) != valence(terms.front()))
                fail("terms of a sum must all be vectors, all scalars or all operators");
        }
        if (terms.size() == 1) return terms.front();
        return sum(std::move(terms));
    }

    struct Unit {
        enum class Kind { Scalar, Vec, Covec, SP } kind;
        ExprPtr expr;      // Vec / Covec inner / SP
        ScalarPtr scalar;  // Scalar
        SourceSpan span;
    };

    ExprPtr parse_chain() {
        std::vector<Unit> units;
        units.push_back(parse_unit());
        while (true) {
            skip_ws();
            if (!peek_delim()) break;
            eat_delim();
            skip_ws();
            units.push_back(parse_unit());
        }
        ExprPtr result = assemble_chain(units);
        // A dot after a delimited chain closes the covector of the whole
        // chain: /u/ ^ /v/ . /w/ . is the covector of (/v/ . /w/)-scaled /u/.
        skip_ws();
        if (units.size() > 1 && peek() == '.' && valence(result) == Valence::Vector) {
            std::size_t p = pos_ + 1;
            while (p < text_.size() && std::isspace(static_cast<unsigned char>(text_[p]))) ++p;
            if (p >= text_.size() || text_[p] == ')' || text_[p] == '+') {
                advance();
                return covector(result, result->span);
            }
        }
        return result;
    }

    Unit parse_unit() {
        skip_ws();
        std::size_t start = pos_, scol = col_;
        check_mixed();
        if (scalar_ahead()) {
            ScalarPtr s = parse_scalar_factor();
            skip_ws();
            if (!vec_start_ahead())
                return {Unit::Kind::Scalar, nullptr, s, span_from(start, scol)};
            ExprPtr core = parse_scaled_core();
            core = scaled(s, core, Attachment::BoundToState, span_from(start, scol));
            return finish_vec_unit(core, start, scol);
        }
        ExprPtr core = parse_vec_core();
        return finish_vec_unit(core, start, scol);
    }

    // Bound scalar prefixes stack: (c1)(c2)/n/.
    ExprPtr parse_scaled_core() {
        skip_ws();
        if (scalar_ahead()) {
            std::size_t start = pos_, scol = col_;
            ScalarPtr s = parse_scalar_factor();
            skip_ws();
            if (!vec_start_ahead()) fail("expected a vector after scalar factor");
            ExprPtr inner = parse_scaled_core();
            return scaled(s, inner, Attachment::BoundToState, span_from(start, scol));
        }
        return parse_vec_core();
    }

    // After the vector core of a unit: an infix '.' makes a scalar product
    // when a vector follows and a covector when nothing can follow (end of
    // input, delimiter, ')' or '+').
    Unit finish_vec_unit(ExprPtr core, std::size_t start, std::size_t scol) {
        skip_ws();
        if (peek() == '.' && !std::isdigit(static_cast<unsigned char>(peek(1)))) {
            advance();
            skip_ws();
            if (vec_start_ahead()) {
                if (valence(core) != Valence::Vector)
                    fail("scalar product needs a vector-valued left operand");
                ExprPtr rhs = parse_vec_operand();
                return {Unit::Kind::SP, scalar_product(core, rhs, span_from(start, scol)), nullptr,
                        span_from(start, scol)};
            }
            if (valence(core) != Valence::Vector)
                fail("trailing dot needs a vector-valued expression");
            return {Unit::Kind::Covec, core, nullptr, span_from(start, scol)};
        }
        if (valence(core) == Valence::Scalar)
            return {Unit::Kind::SP, core, nullptr, span_from(start, scol)};
        return {Unit::Kind::Vec, core, nullptr, span_from(start, scol)};
    }

    bool vec_start_ahead() {
        skip_ws();
        char c = peek();
        if (c == '/' && peek(1) != '\\') return true;
        if (c == '(' && !try_scan_complex()) return true;
        if (scalar_ahead()) return true;  // bound scalar prefix
        return opchain_ahead();
    }

    // One vector-valued operand: optional bound scalars, optional operator
    // chain, then an atom. Consumes no dots or delimiters.
    ExprPtr parse_vec_operand() { return parse_scaled_core(); }

    ExprPtr parse_vec_core() {
        skip_ws();
        std::size_t start = pos_, scol = col_;
        check_mixed();
        OpPtr chain;
        if (opchain_ahead()) chain = parse_opchain();
        skip_ws();
        if (!(peek() == '/' || peek() == '(')) {
            if (chain) return op_atom(chain, span_from(start, scol));  // naked operator expression
            check_mixed();
            fail("expected '/state/', '(' or operator symbol", {"/", "("});
        }
        ExprPtr atom = parse_slash_atom();
        if (!chain) {
            // /a//O//b/ reduced matrix elements and the dotless /u/O/v/ form
            if (std::holds_alternative<State>(atom->node)) {
                skip_ws();
                if (peek() == '/' && peek(1) != '\\') {
                    ExprPtr s2 = parse_slash_atom();
                    skip_ws();
                    if (!(peek() == '/' && peek(1) != '\\'))
                        fail("adjacent states: expected a scalar-product dot or a third "
                             "state for a reduced matrix element");
                    ExprPtr s3 = parse_slash_atom();
                    skip_ws();
                    if (peek() == '/' && peek(1) != '\\')
                        fail("too many adjacent states");
                    return reduced_me(std::get<State>(atom->node).label,
                                      std::get<State>(s2->node).label,
                                      std::get<State>(s3->node).label, span_from(start, scol));
                }
                if (opchain_ahead()) {
                    OpPtr mid = parse_opchain();
                    skip_ws();
                    if (peek() != '/')
                        fail("dotless matrix element needs a closing state", {"/"});
                    ExprPtr ket = parse_slash_atom();
                    skip_ws();
                    if ((peek() == '/' && peek(1) != '\\') || opchain_ahead())
                        fail("dotless form allows exactly one operator chain between "
                             "exactly two states");
                    return matrix_element(atom, mid, ket, MEOrigin::SlashDotless,
                                          span_from(start, scol));
                }
            }
            return atom;
        }
        if (valence(atom) != Valence::Vector)
            fail("operator applied to a non-vector expression");
        return apply(chain, atom, span_from(start, scol));
    }

    ExprPtr parse_slash_atom() {
        skip_ws();
        std::size_t start = pos_, scol = col_;
        check_mixed();
        if (peek() == '/') {
            advance();
            std::size_t lstart = pos_;
            while (!at_end() && peek() != '/' && peek() != '\n') advance();
            if (at_end() || peek() != '/') fail("unterminated state: expected closing '/'", {"/"});
            std::string label = std::string(text_.substr(lstart, pos_ - lstart));
            advance();
            // trim the label; interior spaces are part of it
            std::size_t b = label.find_first_not_of(" \t");
            std::size_t e = label.find_last_not_of(" \t");
            if (b == std::string::npos) fail("empty state label");
            return state(label.substr(b, e - b + 1), span_from(start, scol));
        }
        if (peek() == '(') {
            advance();
            ExprPtr inner = parse_sum();
            skip_ws();
            if (peek() != ')') fail("unbalanced parentheses: expected ')'", {")"});
            advance();
            // An operator-valued parenthesized expression may be applied.
            skip_ws();
            if ((std::holds_alternative<OuterProduct>(inner->node) ||
                 std::holds_alternative<OpAtom>(inner->node)) &&
                vec_start_ahead()) {
                OpPtr op;
                if (auto* o = std::get_if<OuterProduct>(&inner->node)) op = op_outer(o->ket, o->bra);
                else op = std::get<OpAtom>(inner->node).op;
                ExprPtr target = parse_vec_operand();
                return apply(op, target, span_from(start, scol));
            }
            return inner;
        }
        fail("expected '/state/' or '('", {"/", "("});
    }

    // Chain assembly. Units are delimiter-separated factors: at most one
    // vector spine, any number of scalar factors, optionally a trailing
    // covector which closes a projection-type operator.
    ExprPtr assemble_chain(std::vector<Unit>& units) {
        if (units.size() == 1) {
            Unit& u = units.front();
            switch (u.kind) {
                case Unit::Kind::Scalar: return scalar_atom(u.scalar, u.span);
                case Unit::Kind::Covec: return covector(u.expr, u.span);
                default: return u.expr;
            }
        }
        for (std::size_t i = 0; i + 1 < units.size(); ++i)
            if (units[i].kind == Unit::Kind::Covec)
                throw ParseError("trailing dot must close the delimited chain", units[i].span);
        if (units.back().kind == Unit::Kind::Covec) {
            ExprPtr bra = units.back().expr;
            units.pop_back();
            ExprPtr ket = assemble_chain(units);
            if (valence(ket) != Valence::Vector)
                throw ParseError("projection-type operator needs a vector ket part",
                                 units.front().span);
            return outer(ket, bra, units.front().span);
        }

        std::size_t vec_count = 0, vec_at = 0;
        for (std::size_t i = 0; i < units.size(); ++i) {
            if (units[i].kind == Unit::Kind::Vec) {
                ++vec_count;
                vec_at = i;
            }
        }
        if (vec_count > 1)
            throw ParseError("two vector factors in one chain need a scalar-product dot",
                             units[1].span);

        auto unit_scalar = [](const Unit& u) {
            return u.kind == Unit::Kind::Scalar ? u.scalar : scalar_ref(u.expr);
        };

        if (vec_count == 1) {
            ExprPtr cur = units[vec_at].expr;
            for (std::size_t i = vec_at + 1; i < units.size(); ++i)
                cur = scaled(unit_scalar(units[i]), cur, Attachment::Delimited, units[i].span);
            for (std::size_t i = vec_at; i-- > 0;)
                cur = scaled(unit_scalar(units[i]), cur, Attachment::Delimited, units[i].span);
            return cur;
        }

        // all factors scalar-valued: the first scalar product (if any) seeds
        // the term, later scalar products and all constants wrap it
        std::size_t seed = units.size();
        for (std::size_t i = 0; i < units.size(); ++i)
            if (units[i].kind == Unit::Kind::SP) {
                seed = i;
                break;
            }
        if (seed == units.size()) {
            ExprPtr cur = scalar_atom(units.back().scalar, units.back().span);
            for (std::size_t i = units.size() - 1; i-- > 0;)
                cur = scaled(units[i].scalar, cur, Attachment::Delimited, units[i].span);
            return cur;
        }
        ExprPtr cur = units[seed].expr;
        for (std::size_t i = seed + 1; i < units.size(); ++i)
            if (units[i].kind == Unit::Kind::SP)
                cur = scaled(scalar_ref(units[i].expr), cur, Attachment::Delimited, units[i].span);
        for (std::size_t i = units.size(); i-- > 0;)
            if (units[i].kind == Unit::Kind::Scalar)
                cur = scaled(units[i].scalar, cur, Attachment::Delimited, units[i].span);
        return cur;
    }

    // =======================================================================
    // bra-ket notation
    // =======================================================================

    ExprPtr parse_bk_term() {
        skip_ws();
        std::size_t start = pos_, scol = col_;
        if (peek_delim()) fail("the delimiting sign is not defined inside bra-ket expressions");
        check_mixed();
        if (scalar_ahead()) {
            ScalarPtr s = parse_scalar_factor();
            skip_ws();
            if (at_end() || peek() == '+' || peek() == ')')
                return scalar_atom(s, span_from(start, scol));
            ExprPtr core = parse_bk_term();  // scalar prefixes stack
            Attachment att = valence(core) == Valence::Vector ? Attachment::BoundToState
                                                              : Attachment::Delimited;
            return scaled(s, core, att, span_from(start, scol));
        }
        return parse_bk_atom();
    }

    ExprPtr parse_bk_atom() {
        skip_ws();
        std::size_t start = pos_, scol = col_;
        if (peek_delim()) fail("the delimiting sign is not defined inside bra-ket expressions");
        check_mixed();
        char c = peek();
        if (c == '|') {
            ExprPtr ket = parse_ket();
            skip_ws();
            if (peek() == '<') {  // |u><v|
                ExprPtr bra = parse_bra_state();
                return outer(ket, bra, span_from(start, scol));
            }
            return ket;
        }
        if (c == '<') return parse_bra_form();
        if (c == '(') {
            advance();
            ExprPtr inner = parse_sum();
            skip_ws();
            if (peek() != ')') fail("unbalanced parentheses: expected ')'", {")"});
            advance();
            skip_ws();
            if (auto* cov = std::get_if<Covector>(&inner->node)) {
                // (<u|O)|v> or (<u|O)(O'|v>): bra action applied to a ket
                if (peek() == '|') {
                    ExprPtr ket = parse_ket();
                    return scalar_product(cov->inner, ket, span_from(start, scol));
                }
                if (peek() == '(') {
                    advance();
                    ExprPtr rhs = parse_sum();
                    skip_ws();
                    if (peek() != ')') fail("unbalanced parentheses: expected ')'", {")"});
                    advance();
                    if (valence(rhs) != Valence::Vector)
                        fail("bra action needs a ket-valued right factor");
                    return scalar_product(cov->inner, rhs, span_from(start, scol));
                }
                return inner;
            }
            if (std::holds_alternative<OuterProduct>(inner->node) ||
                std::holds_alternative<OpAtom>(inner->node)) {
                skip_ws();
                if (peek() == '|' || peek() == '(') {
                    OpPtr op;
                    if (auto* o = std::get_if<OuterProduct>(&inner->node))
                        op = op_outer(o->ket, o->bra);
                    else
                        op = std::get<OpAtom>(inner->node).op;
                    ExprPtr target = peek() == '|' ? parse_ket() : parse_bk_atom();
                    if (valence(target) != Valence::Vector)
                        fail("operator applied to a non-vector expression");
                    return apply(op, target, span_from(start, scol));
                }
            }
            return inner;
        }
        if (opchain_ahead()) {  // O|v>, dag(O)|u>, O(...)
            OpPtr chain = parse_opchain();
            skip_ws();
            if (peek() == '|') {
                ExprPtr ket = parse_ket();
                return apply(chain, ket, span_from(start, scol));
            }
            if (peek() == '(') {
                advance();
                ExprPtr inner = parse_sum();
                skip_ws();
                if (peek() != ')') fail("unbalanced parentheses: expected ')'", {")"});
                advance();
                if (valence(inner) != Valence::Vector)
                    fail("operator applied to a non-vector expression");
                return apply(chain, inner, span_from(start, scol));
            }
            return op_atom(chain, span_from(start, scol));
        }
        check_mixed();
        fail("expected '|ket>', '<bra|', '(' or operator symbol", {"|", "<", "("});
    }

    ExprPtr parse_ket() {
        skip_ws();
        std::size_t start = pos_, scol = col_;
        if (peek() != '|') fail("expected '|'", {"|"});
        advance();
        std::size_t lstart = pos_;
        while (!at_end() && peek() != '>' && peek() != '|' && peek() != '<' && peek() != '\n')
            advance();
        if (peek() != '>') fail("unterminated ket: expected '>'", {">"});
        std::string label(text_.substr(lstart, pos_ - lstart));
        advance();
        return state(trim_label(label, start), span_from(start, scol));
    }

    ExprPtr parse_bra_state() {
        skip_ws();
        std::size_t start = pos_, scol = col_;
        if (peek() != '<') fail("expected '<'", {"<"});
        advance();
        std::size_t lstart = pos_;
        while (!at_end() && peek() != '|' && peek() != '>' && peek() != '\n') advance();
        if (peek() != '|') fail("unterminated bra: expected '|'", {"|"});
        std::string label(text_.substr(lstart, pos_ - lstart));
        advance();
        return state(trim_label(label, start), span_from(start, scol));
    }

    std::string trim_label(const std::string& label, std::size_t at) {
        std::size_t b = label.find_first_not_of(" \t");
        std::size_t e = label.find_last_not_of(" \t");
        if (b == std::string::npos)
            throw ParseError("empty label", {at, at + 1, line_, col_});
        return label.substr(b, e - b + 1);
    }

    // <u|v>, <u|O|v>, <u|O, <u|(O|v>), <a||O||b>
    ExprPtr parse_bra_form() {
        std::size_t start = pos_, scol = col_;
        advance();  // '<'
        std::size_t lstart = pos_;
        while (!at_end() && peek() != '|' && peek() != '>' && peek() != '\n') advance();
        if (peek() != '|') fail("unterminated bra: expected '|'", {"|"});
        std::string bra_label = trim_label(std::string(text_.substr(lstart, pos_ - lstart)), start);
        advance();
        if (peek() == '|') {  // reduced matrix element <a||O||b>
            advance();
            std::size_t mstart = pos_;
            while (!at_end() && peek() != '|' && peek() != '\n') advance();
            if (peek() != '|' || peek(1) != '|') fail("reduced matrix element needs '||'");
            std::string op_label = trim_label(std::string(text_.substr(mstart, pos_ - mstart)), start);
            advance(2);
            std::size_t kstart = pos_;
            while (!at_end() && peek() != '>' && peek() != '\n') advance();
            if (peek() != '>') fail("unterminated reduced matrix element: expected '>'", {">"});
            std::string ket_label = trim_label(std::string(text_.substr(kstart, pos_ - kstart)), start);
            advance();
            return reduced_me(bra_label, op_label, ket_label, span_from(start, scol));
        }
        skip_ws();
        if (at_end() || peek() == ')' || peek() == '+')  // bare bra <u|
            return covector(state(bra_label), span_from(start, scol));
        if (peek() == '(') {  // <u|(O|v>)
            advance();
            ExprPtr inner = parse_sum();
            skip_ws();
            if (peek() != ')') fail("unbalanced parentheses: expected ')'", {")"});
            advance();
            if (valence(inner) != Valence::Vector) fail("bra applied to a non-vector expression");
            return scalar_product(state(bra_label), inner, span_from(start, scol));
        }
        // Decide between <u|label> and an operator chain by scanning ahead
        // for the first structural character.
        std::size_t p = pos_;
        bool plain_label = false;
        while (p < text_.size()) {
            char ch = text_[p];
            if (ch == '>') { plain_label = true; break; }
            if (ch == '|' || ch == ')' || ch == '(' || ch == '\n' || ch == '+') break;
            ++p;
        }
        if (plain_label) {
            std::size_t lab_start = pos_;
            std::string label = trim_label(std::string(text_.substr(lab_start, p - lab_start)), lab_start);
            advance(p - pos_ + 1);  // through '>'
            return scalar_product(state(bra_label), state(label), span_from(start, scol));
        }
        check_mixed();
        if (!opchain_ahead()) fail("expected operator chain or ket label after bra");
        OpPtr chain = parse_opchain();
        skip_ws();
        if (peek() == '|') {
            ExprPtr ket = parse_ket();
            return matrix_element(state(bra_label), chain, ket, MEOrigin::BraketChained,
                                  span_from(start, scol));
        }
        // bare bra action <u|O: the covector conjugate to dag(O)|u>
        return covector(apply(op_dagger(chain), state(bra_label)), span_from(start, scol));
    }
};

inline Notation detect_notation(std::string_view text) {
    for (char c : text) {
        if (c == '/') return Notation::Slash;
        if (c == '<' || c == '|') return Notation::Braket;
    }
    return Notation::Slash;
}

}  // namespace parse_detail

inline ParseResult parse(std::string_view text, ParseHint hint = ParseHint::Auto,
                         std::size_t line_base = 1) {
    Notation n;
    switch (hint) {
        case ParseHint::Slash: n = Notation::Slash; break;
        case ParseHint::Braket: n = Notation::Braket; break;
        default: n = parse_detail::detect_notation(text); break;
    }
    parse_detail::Parser p(text, line_base);
    return {p.run(n), n, {}};
}

struct LineResult {
    std::size_t line = 0;
    std::optional<ParseResult> result;
    std::optional<std::string> error;
    SourceSpan error_span;
};

// One expression per nonblank non-comment line; a parse failure on one line
// does not abort the remaining lines.
inline std::vector<LineResult> parse_file(std::string_view text, ParseHint hint = ParseHint::Auto) {
    std::vector<LineResult> out;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
        ++lineno;
        std::size_t b = line.find_first_not_of(" \t\r");
        if (b != std::string_view::npos && line[b] != '#') {
            LineResult lr;
            lr.line = lineno;
            try {
                lr.result = parse(line, hint, lineno);
            } catch (const ParseError& e) {
                lr.error = e.what();
                lr.error_span = e.span;
            }
            out.push_back(std::move(lr));
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

}  // namespace repfree
