#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using testsupport::data_path;
using testsupport::run_command;

namespace {

const std::string kCli = REPFREE_CLI_PATH;

std::string q(const std::string& s) { return "'" + s + "'"; }

}  // namespace

TEST_CASE("cli parse: AST dump and exit codes") {
    auto ok = run_command(kCli + " parse -e " + q("/u/ . /v/"));
    CHECK(ok.status == 0);
    CHECK(ok.output.find("ScalarProduct") != std::string::npos);
    CHECK(ok.output.find("notation: slash") != std::string::npos);

    auto mixed = run_command(kCli + " parse -e " + q("<u|/v/"));
    CHECK(mixed.status == 1);
    CHECK(mixed.output.find("mixed notation") != std::string::npos);

    auto braket = run_command(kCli + " parse -e " + q("<u|O|v>"));
    CHECK(braket.status == 0);
    CHECK(braket.output.find("MatrixElement braket-chained") != std::string::npos);
}

TEST_CASE("cli check: diagnostics, suggestions and exit codes") {
    std::string model = data_path("unbounded.model");
    auto bad = run_command("REPFREE_COLOR=never " + kCli + " check -m " + model + " -e " +
                           q("<u|P|v>"));
    CHECK(bad.status == 2);
    CHECK(bad.output.find("error BK1") != std::string::npos);
    CHECK(bad.output.find("[suggestion: /u/ . P/v/]") != std::string::npos);

    auto good = run_command(kCli + " check -m " + model + " -e " + q("/u/ . P/v/"));
    CHECK(good.status == 0);

    auto nomodel = run_command(kCli + " check -m /nonexistent.model -e " + q("/u/"));
    CHECK(nomodel.status == 3);
}

TEST_CASE("cli check: structured records") {
    std::string model = data_path("unbounded.model");
    auto r = run_command(kCli + " check --format structured -m " + model + " -e " + q("<u|P|v>"));
    CHECK(r.status == 2);
    CHECK(r.output.find("\"rule\":\"BK1\"") != std::string::npos);
    CHECK(r.output.find("\"suggestion\":\"/u/ . P/v/\"") != std::string::npos);

    // byte-stable across runs
    auto again = run_command(kCli + " check --format structured -m " + model + " -e " +
                             q("<u|P|v>"));
    CHECK(r.output == again.output);
}

TEST_CASE("cli convert: notations and latex targets") {
    auto slash = run_command(kCli + " convert --to slash -e " + q("<psi|O"));
    CHECK(slash.status == 0);
    CHECK(slash.output.find("dag(O)/psi/ .") != std::string::npos);

    auto latex = run_command(kCli + " convert --to latex-slash -e " + q("/u/ . /v/"));
    CHECK(latex.status == 0);
    CHECK(latex.output.find("/u/\\lcdot/v/") != std::string::npos);

    auto braket = run_command(kCli + " convert --to braket -e " + q("/u/ ^ /v/ ."));
    CHECK(braket.status == 0);
    CHECK(braket.output.find("|u><v|") != std::string::npos);

    // anti-linear left action has no bra-ket form: per-line report, exit 2
    std::string model = data_path("finite.model");
    auto unrep = run_command(kCli + " convert --to braket -m " + model + " -e " + q("K/u/ . /v/"));
    CHECK(unrep.status == 2);
    CHECK(unrep.output.find("unrepresentable") != std::string::npos);
    // the right action converts to the parenthesized form
    auto paren = run_command(kCli + " convert --to braket -m " + model + " -e " + q("/u/ . K/v/"));
    CHECK(paren.status == 0);
    CHECK(paren.output.find("<u|(K|v>)") != std::string::npos);
}

TEST_CASE("cli eval: values, sweeps and the force flag") {
    std::string fin = data_path("finite.model");
    auto v = run_command(kCli + " eval -m " + fin + " -e " + q("/u/ . /v/"));
    CHECK(v.status == 0);
    CHECK(v.output.find("scalar: (0+0i)") != std::string::npos);

    std::string unb = data_path("unbounded.model");
    auto single = run_command(kCli + " eval -m " + unb + " -N 1000 -e " + q("/u/ . P/v/"));
    CHECK(single.status == 0);
    CHECK(single.output.find("(N=1000)") != std::string::npos);

    // refused without --force when the checker reports errors
    auto refused = run_command(kCli + " eval -m " + unb + " -N 100 -e " + q("<u|P|v>"));
    CHECK(refused.status == 2);
    CHECK(refused.output.find("--force") != std::string::npos);
    auto forced =
        run_command(kCli + " eval -m " + unb + " -N 100 --force -e " + q("<u|P|v>"));
    CHECK(forced.status == 0);
    CHECK(forced.output.find("[forced]") != std::string::npos);

    // several levels run a sweep
    auto sweep = run_command(kCli + " eval -m " + unb + " -N 1000,10000,50000,100000 -e " +
                             q("/u/ . P/v/"));
    CHECK(sweep.status == 0);
    CHECK(sweep.output.find("verdict: convergent") != std::string::npos);

    // plot-data output: tab separated, no verdict line
    auto plot = run_command(kCli + " eval --plot -m " + unb + " -N 10,100 -e " + q("/u/ . P/v/"));
    CHECK(plot.status == 0);
    CHECK(plot.output.find("N\tvalue") != std::string::npos);
    CHECK(plot.output.find("verdict") == std::string::npos);
}

TEST_CASE("cli demo: the four scenarios") {
    auto unbounded = run_command(kCli + " demo unbounded");
    CHECK(unbounded.status == 0);
    CHECK(unbounded.output.find("16 2\n") != std::string::npos);
    CHECK(unbounded.output.find("256 4\n") != std::string::npos);
    CHECK(unbounded.output.find("4096 8\n") != std::string::npos);
    CHECK(unbounded.output.find("verdict: divergent") != std::string::npos);

    auto riesz = run_command(kCli + " demo riesz --dim 8 --seed 7");
    CHECK(riesz.status == 0);
    CHECK(riesz.output.find("max residual") != std::string::npos);

    auto hellinger = run_command(kCli + " demo hellinger");
    CHECK(hellinger.status == 0);
    CHECK(hellinger.output.find("1000 1000\n") != std::string::npos);

    auto schwarz = run_command(kCli + " demo schwarz --seed 3");
    CHECK(schwarz.status == 0);
    CHECK(schwarz.output.find("violations = 0") != std::string::npos);
}

TEST_CASE("cli: structured output is byte-stable with a fixed seed") {
    auto a = run_command(kCli + " demo riesz --dim 6 --seed 11 --format structured");
    auto b = run_command(kCli + " demo riesz --dim 6 --seed 11 --format structured");
    CHECK(a.status == 0);
    CHECK(a.output == b.output);
    CHECK(a.output.find("\"max_residual\"") != std::string::npos);
}

TEST_CASE("cli: color control via REPFREE_COLOR") {
    std::string model = data_path("unbounded.model");
    auto never = run_command("REPFREE_COLOR=never " + kCli + " check -m " + model + " -e " +
                             q("<u|P|v>"));
    CHECK(never.output.find("\x1b[") == std::string::npos);
    auto always = run_command("REPFREE_COLOR=always " + kCli + " check -m " + model + " -e " +
                              q("<u|P|v>"));
    CHECK(always.output.find("\x1b[31m") != std::string::npos);
}

TEST_CASE("cli convert --trace prints numbered steps") {
    auto r = run_command(kCli + " convert --to braket --trace -e " + q("/u/O/v/"));
    CHECK(r.status == 0);
    CHECK(r.output.find("<u|O|v>") != std::string::npos);
    CHECK(r.output.find("1. dotless-desugar") != std::string::npos);
    CHECK(r.output.find("2. to-braket") != std::string::npos);
}

TEST_CASE("cli explain") {
    auto r = run_command(kCli + " explain BK1");
    CHECK(r.status == 0);
    CHECK(r.output.find("simultaneously") != std::string::npos);
    auto bad = run_command(kCli + " explain ZZ9");
    CHECK(bad.status == 3);
}

TEST_CASE("cli: batch files keep per-line isolation") {
    std::string tmp = "/tmp/repfree_cli_batch.txt";
    {
        std::ofstream out(tmp);
        out << "/u/ . /v/\n# comment\n<a|b>\n<u|/v/\n";
    }
    auto r = run_command(kCli + " parse " + tmp);
    CHECK(r.status == 1);  // one line fails
    CHECK(r.output.find("notation: slash") != std::string::npos);
    CHECK(r.output.find("notation: braket") != std::string::npos);
    CHECK(r.output.find("mixed notation") != std::string::npos);
}
