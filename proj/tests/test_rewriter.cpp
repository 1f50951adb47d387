#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace repfree;
using testsupport::ExprGen;
using testsupport::random_finite_model;

namespace {

bool replayable(const RewriteTrace& t, const ExprPtr& initial, const ExprPtr& final_expr) {
    ExprPtr cur = initial;
    for (const auto& step : t.steps) {
        if (!equal(step.before, cur)) return false;
        cur = step.after;
    }
    return equal(cur, final_expr);
}

}  // namespace

TEST_CASE("convert: the correspondence table") {
    auto c1 = convert(parse("<psi|O").expr, Notation::Slash);
    CHECK(render_slash(c1.expr) == "dag(O)/psi/ .");

    auto c2 = convert(parse("/u/ ^ /v/ .").expr, Notation::Braket);
    CHECK(render_braket(c2.expr).text == "|u><v|");

    auto c3 = convert(parse("/psi/ . O/xi/").expr, Notation::Braket);
    CHECK(render_braket(c3.expr).text == "<psi|O|xi>");
    bool noted = false;
    for (const auto& n : c3.notes)
        if (n.find("conditional on the domain") != std::string::npos) noted = true;
    CHECK(noted);

    auto c4 = convert(parse("<psi|O|xi>").expr, Notation::Slash);
    CHECK(render_slash(c4.expr) == "/psi/ . O/xi/");

    // <psi|dag(O)  =>  O/psi/ . with an involution note
    auto c5 = convert(parse("<psi|dag(O)").expr, Notation::Slash);
    CHECK(render_slash(c5.expr) == "O/psi/ .");
}

TEST_CASE("convert: anti-linear chains toward bra-ket") {
    LinearityOracle oracle = [](const std::string& s) { return s == "K"; };
    // right action: parenthesized target form
    auto right = convert(parse("/u/ . K/v/").expr, Notation::Braket, oracle);
    CHECK_FALSE(right.unrepresentable.has_value());
    CHECK(render_braket(right.expr, oracle).text == "<u|(K|v>)");
    // left action: no bra-ket form at all
    auto left = convert(parse("K/u/ . /v/").expr, Notation::Braket, oracle);
    CHECK(left.unrepresentable.has_value());
}

TEST_CASE("convert round trip equals simplify on slash corpus members") {
    auto lines = parse_file(testsupport::read_file(testsupport::data_path("corpus.txt")));
    int covered = 0;
    for (const auto& lr : lines) {
        if (!lr.result || lr.result->notation != Notation::Slash) continue;
        const ExprPtr& e = lr.result->expr;
        auto there = convert(e, Notation::Braket);
        auto back = convert(there.expr, Notation::Slash);
        INFO("line " << lr.line << ": " << render_slash(e));
        CHECK(equal(back.expr, simplify(e).expr));
        ++covered;
    }
    CHECK(covered >= 20);
}

TEST_CASE("adjoint: projection, composition, involution") {
    RewriteTrace t1;
    ExprPtr a1 = adjoint(parse("/u/ ^ /v/ .").expr, &t1);
    CHECK(render_slash(a1) == "/v/ ^ /u/ .");
    CHECK(replayable(t1, parse("/u/ ^ /v/ .").expr, a1));

    ExprPtr a2 = adjoint(parse("dag(A B)").expr);
    CHECK(equal(a2, op_atom(op_compose({op_symbol("A"), op_symbol("B")}))));
    ExprPtr a3 = adjoint(op_atom(op_compose({op_symbol("A"), op_symbol("B")})));
    CHECK(render_slash(a3) == "dag(B) dag(A)");

    RewriteTrace t4;
    ExprPtr a4 = adjoint(op_atom(op_dagger(op_symbol("X"))), &t4);
    CHECK(equal(a4, op_atom(op_symbol("X"))));
    REQUIRE_FALSE(t4.steps.empty());
    CHECK(t4.steps.back().note.find("involution") != std::string::npos);

    // dag(c ^ O) = conj(c) ^ dag(O)
    ExprPtr scaled_op = scaled(lit(cplx_t(0, 2)), outer(state("u"), state("v")),
                               Attachment::Delimited);
    ExprPtr a5 = adjoint(scaled_op);
    CHECK(equal(a5, scaled(lit(cplx_t(0, -2)), outer(state("v"), state("u")),
                           Attachment::Delimited)));

    CHECK_THROWS_AS(adjoint(state("u")), std::invalid_argument);
}

TEST_CASE("adjoint is an involution up to simplify") {
    std::vector<ExprPtr> ops = {
        parse("/u/ ^ /v/ .").expr,
        op_atom(op_compose({op_symbol("A"), op_symbol("B")})),
        scaled(lit(cplx_t(1, 1)), outer(state("m"), state("n")), Attachment::Delimited),
        sum({outer(state("u"), state("v")), outer(state("m"), state("n"))}),
    };
    for (const auto& e : ops) {
        INFO(render_slash(e));
        CHECK(equal(adjoint(adjoint(e)), simplify(e).expr));
    }
}

TEST_CASE("insert_identity: symbolic and expanded forms") {
    // abstract basis: the I factor stays symbolic
    ExprPtr sym = insert_identity(parse("/xi/ . /psi/").expr, "n", {InsertSite::Kind::AtDot, 0});
    CHECK(render_slash(sym) == "/xi/ . I[n]/psi/");

    // declared basis: expands to the sum of projections
    HilbertModel m = random_finite_model(3, 5);
    ExprPtr expanded =
        insert_identity(parse("/xi/ . /psi/").expr, "b", {InsertSite::Kind::AtDot, 0}, &m);
    ExprPtr expect = sum({
        parse("/xi/ . /b0/ ^ /b0/ . /psi/").expr,
        parse("/xi/ . /b1/ ^ /b1/ . /psi/").expr,
        parse("/xi/ . /b2/ ^ /b2/ . /psi/").expr,
    });
    CHECK(equal(expanded, expect));

    CHECK_THROWS_AS(insert_identity(parse("/xi/").expr, "b", {InsertSite::Kind::AtDot, 0}),
                    std::invalid_argument);
}

TEST_CASE("insert_identity: double insertion matches the matrix expansion") {
    HilbertModel m = random_finite_model(2, 6);
    ExprPtr both = insert_identity(parse("/u/ . O/v/").expr, "b",
                                   {InsertSite::Kind::BothSides, 0}, &m);
    // the (m, n) term has the shape /u/ . /m/ ^ /m/ . O/n/ ^ /n/ . /v/
    const auto& su = std::get<Sum>(both->node);
    REQUIRE(su.terms.size() == 4);
    CHECK(equal(su.terms.front(), parse("/u/ . /b0/ ^ /b0/ . O/b0/ ^ /b0/ . /v/").expr));

    // symbolic shape: /u/ . I O I /v/
    ExprPtr sym = insert_identity(parse("/u/ . O/v/").expr, "b",
                                  {InsertSite::Kind::BothSides, 0});
    CHECK(render_slash(sym) == "/u/ . I[b] O I[b]/v/");
}

TEST_CASE("insert_identity preserves value on finite models") {
    for (std::uint64_t seed : {101u, 102u, 103u}) {
        HilbertModel m = random_finite_model(5, seed);
        for (const char* text : {"/xi/ . /psi/", "/u/ . O/v/"}) {
            ExprPtr e = parse(text).expr;
            Value direct = evaluate(e, m);
            ExprPtr once = insert_identity(e, "b", {InsertSite::Kind::AtDot, 0}, &m);
            Value v1 = evaluate(once, m);
            CHECK(std::abs(v1.scalar - direct.scalar) < 1e-10);
        }
        // applied twice around the operator
        ExprPtr e = parse("/u/ . O/v/").expr;
        ExprPtr both = insert_identity(e, "b", {InsertSite::Kind::BothSides, 0}, &m);
        CHECK(std::abs(evaluate(both, m).scalar - evaluate(e, m).scalar) < 1e-10);
    }
}

TEST_CASE("simplify: attachment normalization and constant extraction") {
    auto s1 = simplify(parse("(2+0i)/psi/ . /xi/").expr);
    CHECK(render_slash(s1.expr) == "(2-0i) ^ /psi/ . /xi/");
    CHECK(replayable(s1.trace, parse("(2+0i)/psi/ . /xi/").expr, s1.expr));

    auto s2 = simplify(parse("(/u/ ^ /v/ .) /w/").expr);
    CHECK(render_slash(s2.expr) == "/u/ ^ /v/ . /w/");

    auto s3 = simplify(parse("/m/ ^ (2+0i) ^ /n/ .").expr);
    CHECK(render_slash(s3.expr) == "(2+0i) ^ /m/ ^ /n/ .");

    // right slot: no conjugation
    auto s4 = simplify(parse("/xi/ . (2+3i)/psi/").expr);
    CHECK(render_slash(s4.expr) == "(2+3i) ^ /xi/ . /psi/");
}

TEST_CASE("simplify: conjugate-symmetry canonicalization only when both orders appear") {
    ExprPtr both = sum({parse("/u/ . /v/").expr, parse("/v/ . /u/").expr});
    auto s = simplify(both);
    const auto& su = std::get<Sum>(s.expr->node);
    REQUIRE(su.terms.size() == 2);
    CHECK(equal(su.terms[0], parse("/u/ . /v/").expr));
    CHECK(equal(su.terms[1], scalar_atom(conj_scalar(scalar_ref(parse("/u/ . /v/").expr)))));

    // a single orientation keeps the user's order
    auto alone = simplify(parse("/v/ . /u/").expr);
    CHECK(render_slash(alone.expr) == "/v/ . /u/");
}

TEST_CASE("simplify is idempotent on the random corpus") {
    ExprGen gen(123);
    for (int i = 0; i < 500; ++i) {
        ExprPtr e = gen.expr(5);
        ExprPtr once = simplify(e).expr;
        ExprPtr twice = simplify(once).expr;
        INFO("expr: " << render_slash(e));
        CHECK(equal(once, twice));
    }
}

TEST_CASE("expand_linear: sums and scalars through both slots") {
    ExprPtr e1 = parse("/u/ . ((1+0i)/v/ + (2+0i)/w/)").expr;
    ExprPtr x1 = expand_linear(e1);
    ExprPtr want1 = sum({scaled(lit(cplx_t(1, 0)), parse("/u/ . /v/").expr, Attachment::Delimited),
                         scaled(lit(cplx_t(2, 0)), parse("/u/ . /w/").expr, Attachment::Delimited)});
    CHECK(equal(x1, want1));

    // left slot conjugates
    ExprPtr e2 = parse("((0+1i)/v/) . /u/").expr;
    ExprPtr x2 = expand_linear(e2);
    CHECK(equal(x2, scaled(lit(cplx_t(0, -1)), parse("/v/ . /u/").expr, Attachment::Delimited)));

    // anti-linear operators conjugate scalars when distributed
    LinearityOracle oracle = [](const std::string& s) { return s == "K"; };
    ExprPtr e3 = parse("K((0+2i)/v/)").expr;
    ExprPtr x3 = expand_linear(e3, oracle);
    CHECK(equal(x3, scaled(lit(cplx_t(0, -2)), parse("K/v/").expr, Attachment::Delimited)));
    // and linear ones do not
    ExprPtr x4 = expand_linear(parse("O((0+2i)/v/)").expr, oracle);
    CHECK(equal(x4, scaled(lit(cplx_t(0, 2)), parse("O/v/").expr, Attachment::Delimited)));
}

TEST_CASE("rewrites preserve value on checker-clean finite expressions") {
    HilbertModel m = random_finite_model(4, 55);
    LinearityOracle oracle = oracle_from(m);
    ExprGen gen(56);
    int covered = 0;
    for (int i = 0; i < 300; ++i) {
        ExprPtr e = gen.expr(4);
        if (valence(e) != Valence::Scalar && valence(e) != Valence::Vector) continue;
        bool errors = false;
        for (const auto& d : check(e, m, {}))
            if (d.severity == Severity::Error) errors = true;
        if (errors) continue;
        Value before = evaluate(e, m);
        for (const ExprPtr& rewritten :
             {simplify(e).expr, expand_linear(e, oracle), convert(e, Notation::Braket, oracle).expr,
              convert(e, Notation::Slash, oracle).expr}) {
            Value after = evaluate(rewritten, m);
            INFO("expr: " << render_slash(e) << "  ->  " << render_slash(rewritten));
            REQUIRE(after.kind == before.kind);
            if (before.kind == Value::Kind::Scalar) {
                CHECK(std::abs(after.scalar - before.scalar) < 1e-10);
            } else {
                CHECK(max_abs_diff(after.coeffs, before.coeffs) < 1e-10);
            }
        }
        ++covered;
    }
    CHECK(covered > 100);
}

TEST_CASE("trace output: numbered steps, one rule per line") {
    auto s = simplify(parse("(2+0i)/psi/ . /xi/").expr);
    std::string lines = trace_lines(s.trace);
    CHECK(lines.find("1. ") == 0);
    CHECK(lines.find("attachment-normalization") != std::string::npos);
    std::string bk = trace_lines(s.trace, Notation::Braket);
    CHECK(bk.find("1. ") == 0);
}

TEST_CASE("no rewriting under reduced matrix elements") {
    ExprPtr e = parse("/j1//Oj//j2/").expr;
    CHECK(equal(simplify(e).expr, e));
    CHECK(equal(convert(e, Notation::Braket).expr, e));
    CHECK(render_braket(convert(e, Notation::Braket).expr).text == "<j1||Oj||j2>");
}
