#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace repfree;
using testsupport::ExprGen;

TEST_CASE("parse: scalar product of two states") {
    auto r = parse("/u/ . /v/");
    CHECK(r.notation == Notation::Slash);
    CHECK(equal(r.expr, scalar_product(state("u"), state("v"))));
}

TEST_CASE("parse: chained bra-ket matrix element") {
    auto r = parse("<u|O|v>");
    CHECK(r.notation == Notation::Braket);
    CHECK(equal(r.expr,
                matrix_element(state("u"), op_symbol("O"), state("v"), MEOrigin::BraketChained)));
}

TEST_CASE("parse: delimited scaled chain") {
    // /u/ scaled by two delimited scalar products
    auto r = parse("/u/ ^ /v1/ . /w1/ ^ /v2/ . /w2/");
    ExprPtr expect = scaled(
        scalar_ref(scalar_product(state("v2"), state("w2"))),
        scaled(scalar_ref(scalar_product(state("v1"), state("w1"))), state("u"),
               Attachment::Delimited),
        Attachment::Delimited);
    CHECK(equal(r.expr, expect));
}

TEST_CASE("parse: projection-type operator and its action") {
    CHECK(equal(parse("/u/ ^ /v/ .").expr, outer(state("u"), state("v"))));
    CHECK(equal(parse("/u/ ^ /v/ . /w/").expr,
                scaled(scalar_ref(scalar_product(state("v"), state("w"))), state("u"),
                       Attachment::Delimited)));
    CHECK(equal(parse("(/u/ ^ /v/ .) /w/").expr,
                apply(op_outer(state("u"), state("v")), state("w"))));
}

TEST_CASE("parse: bound vs delimited constants") {
    ExprPtr bound = parse("(2+0i)/psi/ . /xi/").expr;
    ExprPtr delim = parse("(2+0i) ^ /psi/ . /xi/").expr;
    CHECK(equal(bound, scalar_product(scaled(lit(cplx_t(2, 0)), state("psi"),
                                             Attachment::BoundToState),
                                      state("xi"))));
    CHECK(equal(delim, scaled(lit(cplx_t(2, 0)),
                              scalar_product(state("psi"), state("xi")), Attachment::Delimited)));
    CHECK_FALSE(equal(bound, delim));
}

TEST_CASE("parse: operator chains, dagger forms and identity") {
    CHECK(equal(parse("dag(O)/u/ . /v/").expr,
                scalar_product(apply(op_dagger(op_symbol("O")), state("u")), state("v"))));
    CHECK(equal(parse("/u/ . I O I /v/").expr,
                scalar_product(state("u"),
                               apply(op_compose({op_identity(), op_symbol("O"), op_identity()}),
                                     state("v")))));
    CHECK(equal(parse("/xi/ . I[b]/psi/").expr,
                scalar_product(state("xi"), apply(op_identity("b"), state("psi")))));
    CHECK(equal(parse("dag(A B)/u/").expr,
                apply(op_dagger(op_compose({op_symbol("A"), op_symbol("B")})), state("u"))));
}

TEST_CASE("parse: unicode aliases for the delimiter and dagger") {
    CHECK(equal(parse("/u/ \xe2\x88\xa7 /v/ .").expr, parse("/u/ ^ /v/ .").expr));
    CHECK(equal(parse("O\xe2\x80\xa0/u/").expr, apply(op_dagger(op_symbol("O")), state("u"))));
    CHECK(equal(parse("/u/ /\\ /v/ .").expr, parse("/u/ ^ /v/ .").expr));
}

TEST_CASE("parse: dotless and reduced matrix elements") {
    CHECK(equal(parse("/u/O/v/").expr,
                matrix_element(state("u"), op_symbol("O"), state("v"), MEOrigin::SlashDotless)));
    CHECK(equal(parse("/n1', n2'/O/n1, n2/").expr,
                matrix_element(state("n1', n2'"), op_symbol("O"), state("n1, n2"),
                               MEOrigin::SlashDotless)));
    CHECK(equal(parse("/j1//Oj//j2/").expr, reduced_me("j1", "Oj", "j2")));
    CHECK(equal(parse("<j1||Oj||j2>").expr, reduced_me("j1", "Oj", "j2")));
    // exactly one operator chain between exactly two states
    CHECK_THROWS_AS(parse("/u/O/v/P/w/"), ParseError);
    CHECK_THROWS_AS(parse("/u/ /v/"), ParseError);
}

TEST_CASE("parse: bra-ket action forms are distinct ASTs") {
    ExprPtr right = parse("<u|(O|v>)").expr;
    ExprPtr left = parse("(<u|O)|v>").expr;
    CHECK(equal(right, scalar_product(state("u"), apply(op_symbol("O"), state("v")))));
    CHECK(equal(left, scalar_product(apply(op_dagger(op_symbol("O")), state("u")), state("v"))));
    CHECK_FALSE(equal(right, left));
    // two-sided action form
    CHECK(equal(parse("(<u|O)(P|v>)").expr,
                scalar_product(apply(op_dagger(op_symbol("O")), state("u")),
                               apply(op_symbol("P"), state("v")))));
}

TEST_CASE("parse: bare bra action is the covector of dag(O)|u>") {
    CHECK(equal(parse("<psi|O").expr,
                covector(apply(op_dagger(op_symbol("O")), state("psi")))));
    CHECK(equal(parse("<u|").expr, covector(state("u"))));
    CHECK(equal(parse("O/psi/ .").expr, covector(apply(op_symbol("O"), state("psi")))));
}

TEST_CASE("parse: labels with quantum numbers") {
    CHECK(equal(parse("/p1 sz1, p2 sz2 +/").expr, state("p1 sz1, p2 sz2 +")));
    CHECK(equal(parse("|p1 sz1, p2 sz2 +>").expr, state("p1 sz1, p2 sz2 +")));
    CHECK(equal(parse("<n1', n2'|O|n1, n2>").expr,
                matrix_element(state("n1', n2'"), op_symbol("O"), state("n1, n2"),
                               MEOrigin::BraketChained)));
}

TEST_CASE("parse: errors carry spans and expected sets") {
    try {
        parse("/u/ . (/v/");
        FAIL("expected unbalanced parenthesis error");
    } catch (const ParseError& e) {
        CHECK_FALSE(e.expected.empty());
    }
    CHECK_THROWS_AS(parse(""), ParseError);
    CHECK_THROWS_AS(parse("/u"), ParseError);     // unterminated state
    CHECK_THROWS_AS(parse("<u"), ParseError);     // unterminated bra
    CHECK_THROWS_AS(parse("|v"), ParseError);     // unterminated ket
    CHECK_THROWS_AS(parse("//"), ParseError);     // empty label
    CHECK_THROWS_AS(parse("<u|v> ^ <w|"), ParseError);  // delimiter in bra-ket
}

TEST_CASE("parse: mixed notation is rejected at the offending column") {
    try {
        parse("<u|/v/");
        FAIL("expected mixed-notation error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("mixed notation") != std::string::npos);
        CHECK(e.span.column == 4);  // the '/'
    }
    CHECK_THROWS_AS(parse("/u/ . <v|"), ParseError);
}

TEST_CASE("parse_file: per-line isolation, comments, notations") {
    auto lines = parse_file("/u/ . /v/\n  # note\n<a|b>\n<u|/v/\n");
    REQUIRE(lines.size() == 3);  // comment skipped
    CHECK(lines[0].result->notation == Notation::Slash);
    CHECK(lines[1].result->notation == Notation::Braket);
    CHECK(lines[1].line == 3);
    REQUIRE(lines[2].error.has_value());
    CHECK(lines[2].error_span.column == 4);
    CHECK(lines[2].line == 4);
}

TEST_CASE("grammar totality on the shipped corpus") {
    auto lines = parse_file(testsupport::read_file(testsupport::data_path("corpus.txt")));
    REQUIRE(lines.size() >= 30);
    for (const auto& lr : lines) {
        INFO("line " << lr.line);
        CHECK_FALSE(lr.error.has_value());
    }
}

TEST_CASE("property: slash render-parse round trip on random trees") {
    ExprGen gen(42);
    for (int i = 0; i < 500; ++i) {
        ExprPtr e = gen.expr(5);
        std::string text = render_slash(e);
        INFO("expr: " << text);
        ParseResult back = parse(text, ParseHint::Slash);
        CHECK(equal(back.expr, e));
    }
}

TEST_CASE("property: bra-ket render-parse round trip on random trees") {
    ExprGen gen(43, /*braket_flavor=*/true);
    int rendered = 0;
    for (int i = 0; i < 500; ++i) {
        ExprPtr e = gen.expr(4);
        RenderResult r = render_braket(e);
        if (!r.ok()) continue;  // constructs with no chained bra-ket form
        ++rendered;
        INFO("expr: " << r.text);
        ParseResult back = parse(r.text, ParseHint::Braket);
        CHECK(equal(back.expr, e));
    }
    CHECK(rendered > 300);
}

TEST_CASE("parse: every leaf carries a span") {
    auto r = parse("/u/ . O/v/");
    const auto& sp = std::get<ScalarProduct>(r.expr->node);
    CHECK_FALSE(sp.left->span.empty());
    const auto& appl = std::get<OpApply>(sp.right->node);
    CHECK_FALSE(appl.arg->span.empty());
    CHECK(sp.left->span.start <= sp.left->span.end);
}
