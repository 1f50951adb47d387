#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace repfree;
using testsupport::ExprGen;

TEST_CASE("render_slash: atoms and canonical forms") {
    CHECK(render_slash(state("u")) == "/u/");
    CHECK(render_slash(scalar_product(state("u"), apply(op_symbol("O"), state("v")))) ==
          "/u/ . O/v/");
    // normalized action of a projection-type operator
    ExprPtr applied = scaled(scalar_ref(scalar_product(state("v"), state("w"))), state("u"),
                             Attachment::Delimited);
    CHECK(render_slash(applied) == "/u/ ^ /v/ . /w/");
    CHECK(render_slash(outer(state("u"), state("v"))) == "/u/ ^ /v/ .");
    CHECK(render_slash(covector(apply(op_dagger(op_symbol("O")), state("psi")))) ==
          "dag(O)/psi/ .");
    CHECK(render_slash(reduced_me("j1", "Oj", "j2")) == "/j1//Oj//j2/");
}

TEST_CASE("render_braket: canonical forms") {
    CHECK(render_braket(outer(state("u"), state("v"))).text == "|u><v|");
    CHECK(render_braket(matrix_element(state("u"), op_symbol("O"), state("v"),
                                       MEOrigin::BraketChained))
              .text == "<u|O|v>");
    CHECK(render_braket(scalar_product(state("u"), apply(op_symbol("O"), state("v")))).text ==
          "<u|(O|v>)");
    CHECK(render_braket(scalar_product(apply(op_dagger(op_symbol("O")), state("u")), state("v")))
              .text == "(<u|O)|v>");
    CHECK(render_braket(covector(state("u"))).text == "<u|");
    CHECK(render_braket(covector(apply(op_dagger(op_symbol("O")), state("u")))).text == "<u|O");
}

TEST_CASE("render_braket: anti-linear chains are unrepresentable") {
    LinearityOracle oracle = [](const std::string& s) { return s == "K"; };
    auto chained =
        render_braket(matrix_element(state("u"), op_symbol("K"), state("v"),
                                     MEOrigin::BraketChained),
                      oracle);
    REQUIRE_FALSE(chained.ok());
    CHECK(chained.unrepresentable->find("anti-linear") != std::string::npos);

    auto left = render_braket(
        scalar_product(apply(op_symbol("K"), state("u")), state("v")), oracle);
    REQUIRE_FALSE(left.ok());
    CHECK(left.unrepresentable->find("anti-linear operator in chained form") !=
          std::string::npos);

    // the parenthesized right-action form is the legitimate workaround
    auto right = render_braket(
        scalar_product(state("u"), apply(op_symbol("K"), state("v"))), oracle);
    CHECK(right.ok());
    CHECK(right.text == "<u|(K|v>)");
}

namespace {

// Does the tree contain a construct whose bra-ket form would chain an
// anti-linear operator: a chained matrix element or an operator chain in a
// bra-side slot?
bool wants_antilinear_chain(const ExprPtr& e, const LinearityOracle& oracle) {
    if (auto* me = std::get_if<MatrixElement>(&e->node))
        return chain_antilinear(me->op, oracle) ||
               wants_antilinear_chain(me->bra, oracle) || wants_antilinear_chain(me->ket, oracle);
    if (auto* sp = std::get_if<ScalarProduct>(&e->node)) {
        if (auto* l = std::get_if<OpApply>(&sp->left->node))
            if (chain_antilinear(l->op, oracle)) return true;
        return wants_antilinear_chain(sp->left, oracle) ||
               wants_antilinear_chain(sp->right, oracle);
    }
    if (auto* c = std::get_if<Covector>(&e->node)) {
        if (auto* a = std::get_if<OpApply>(&c->inner->node))
            if (chain_antilinear(a->op, oracle)) return true;
        return wants_antilinear_chain(c->inner, oracle);
    }
    if (auto* a = std::get_if<OpApply>(&e->node)) return wants_antilinear_chain(a->arg, oracle);
    if (auto* sc = std::get_if<Scaled>(&e->node)) {
        if (auto* r = std::get_if<ScalarRef>(&sc->scalar->node))
            if (wants_antilinear_chain(r->expr, oracle)) return true;
        return wants_antilinear_chain(sc->term, oracle);
    }
    if (auto* su = std::get_if<Sum>(&e->node)) {
        for (const auto& t : su->terms)
            if (wants_antilinear_chain(t, oracle)) return true;
        return false;
    }
    if (auto* sa = std::get_if<ScalarAtom>(&e->node)) {
        if (auto* r = std::get_if<ScalarRef>(&sa->value->node))
            return wants_antilinear_chain(r->expr, oracle);
        if (auto* c = std::get_if<ScalarConj>(&sa->value->node))
            if (auto* r = std::get_if<ScalarRef>(&c->inner->node))
                return wants_antilinear_chain(r->expr, oracle);
    }
    return false;
}

}  // namespace

TEST_CASE("property: render_braket never emits a chained form for anti-linear operators") {
    LinearityOracle oracle = [](const std::string& s) { return s == "K"; };
    ExprGen gen(99, /*braket_flavor=*/true);
    int refused = 0;
    for (int i = 0; i < 500; ++i) {
        ExprPtr e = gen.expr(4);
        RenderResult r = render_braket(e, oracle);
        INFO("expr (slash): " << render_slash(e));
        if (wants_antilinear_chain(e, oracle)) {
            CHECK_FALSE(r.ok());
            ++refused;
        }
    }
    CHECK(refused > 10);
}

TEST_CASE("render_latex: slash dialect uses the footnote macros") {
    CHECK(render_latex(scalar_product(state("u"), state("v")), LatexDialect::Slash) ==
          "/u/\\lcdot/v/");
    ExprPtr delim = scaled(lit(cplx_t(2, 0)), scalar_product(state("psi"), state("xi")),
                           Attachment::Delimited);
    CHECK(render_latex(delim, LatexDialect::Slash) == "(2+0i)\\sep/\\psi/\\lcdot/\\xi/");
    CHECK(render_latex(outer(state("u"), state("v")), LatexDialect::Slash) ==
          "/u/\\sep/v/\\lcdot");
    CHECK(render_latex(state("psi"), LatexDialect::Slash) == "/\\psi/");
}

TEST_CASE("render_latex: braket dialect") {
    CHECK(render_latex(scalar_product(state("u"), state("v")), LatexDialect::Braket) ==
          "\\langle u|v\\rangle");
    CHECK(render_latex(matrix_element(state("u"), op_symbol("O"), state("v"),
                                      MEOrigin::BraketChained),
                       LatexDialect::Braket) == "\\langle u|O|v\\rangle");
    CHECK(render_latex(outer(state("u"), state("v")), LatexDialect::Braket) ==
          "|u\\rangle\\langle v|");
    CHECK(render_latex(apply(op_dagger(op_symbol("O")), state("u")), LatexDialect::Braket) ==
          "O^{\\dagger}|u\\rangle");
}

TEST_CASE("latex preamble carries the macro definitions") {
    std::string p = latex_preamble();
    CHECK(p.find("\\newcommand{\\lcdot}") != std::string::npos);
    CHECK(p.find("\\newcommand{\\sep}") != std::string::npos);
    CHECK(p.find("amssymb") != std::string::npos);
}

TEST_CASE("deterministic rendering: equal trees render identically") {
    ExprGen g1(7), g2(7);
    for (int i = 0; i < 200; ++i) {
        ExprPtr a = g1.expr(5);
        ExprPtr b = g2.expr(5);
        REQUIRE(equal(a, b));
        CHECK(render_slash(a) == render_slash(b));
        CHECK(render_latex(a, LatexDialect::Slash) == render_latex(b, LatexDialect::Slash));
    }
}

TEST_CASE("complex literal format keeps the imaginary sign") {
    CHECK(format_complex(cplx_t(2.0, 0.0)) == "(2+0i)");
    CHECK(format_complex(std::conj(cplx_t(2.0, 0.0))) == "(2-0i)");  // -0.0 preserved
    CHECK(format_complex(cplx_t(1.5, -2.25)) == "(1.5-2.25i)");
}
