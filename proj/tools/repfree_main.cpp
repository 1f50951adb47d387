// Command-line front end: parse, check, convert, eval and demo subcommands
// over the notation toolkit. Exit codes: 0 clean, 1 parse error, 2
// check/convert error, 3 model or I/O error.
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "repfree/repfree.hpp"

using json = nlohmann::ordered_json;
using namespace repfree;

namespace {

constexpr int kExitParse = 1;
constexpr int kExitCheck = 2;
constexpr int kExitModel = 3;

bool use_color() {
    const char* env = std::getenv("REPFREE_COLOR");
    std::string mode = env ? env : "auto";
    if (mode == "always") return true;
    if (mode == "never") return false;
    return isatty(fileno(stdout));
}

std::string colorize(Severity s, const std::string& text) {
    if (!use_color()) return text;
    const char* code = s == Severity::Error ? "\x1b[31m" : s == Severity::Warning ? "\x1b[33m" : "\x1b[36m";
    return std::string(code) + text + "\x1b[0m";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Inputs: -e expression or positional files, one expression per line.
struct Inputs {
    std::vector<std::pair<std::size_t, std::string>> lines;  // (line number, text)
};

Inputs gather(const std::string& inline_expr, const std::vector<std::string>& files) {
    Inputs in;
    if (!inline_expr.empty()) in.lines.emplace_back(1, inline_expr);
    for (const auto& f : files) {
        std::string text = read_file(f);
        std::size_t lineno = 0, pos = 0;
        while (pos <= text.size()) {
            std::size_t nl = text.find('\n', pos);
            std::string line = text.substr(pos, nl == std::string::npos ? nl : nl - pos);
            ++lineno;
            std::size_t b = line.find_first_not_of(" \t\r");
            if (b != std::string::npos && line[b] != '#') in.lines.emplace_back(lineno, line);
            if (nl == std::string::npos) break;
            pos = nl + 1;
        }
    }
    return in;
}

ParseHint hint_of(const std::string& s) {
    if (s == "slash") return ParseHint::Slash;
    if (s == "braket") return ParseHint::Braket;
    return ParseHint::Auto;
}

// ---- AST dump --------------------------------------------------------------

void dump_op(const OpPtr& op, std::ostream& os, int indent);

void dump_scalar(const ScalarPtr& s, std::ostream& os, int indent);

void dump(const ExprPtr& e, std::ostream& os, int indent = 0) {
    std::string pad(2 * indent, ' ');
    if (auto* s = std::get_if<State>(&e->node)) {
        os << pad << "State " << s->label << "\n";
    } else if (auto* c = std::get_if<Covector>(&e->node)) {
        os << pad << "Covector\n";
        dump(c->inner, os, indent + 1);
    } else if (auto* a = std::get_if<OpApply>(&e->node)) {
        os << pad << "OpApply\n";
        dump_op(a->op, os, indent + 1);
        dump(a->arg, os, indent + 1);
    } else if (auto* sp = std::get_if<ScalarProduct>(&e->node)) {
        os << pad << "ScalarProduct\n";
        dump(sp->left, os, indent + 1);
        dump(sp->right, os, indent + 1);
    } else if (auto* o = std::get_if<OuterProduct>(&e->node)) {
        os << pad << "OuterProduct\n";
        dump(o->ket, os, indent + 1);
        dump(o->bra, os, indent + 1);
    } else if (auto* sc = std::get_if<Scaled>(&e->node)) {
        os << pad << "Scaled "
           << (sc->attachment == Attachment::BoundToState ? "bound-to-state" : "delimited") << "\n";
        dump_scalar(sc->scalar, os, indent + 1);
        dump(sc->term, os, indent + 1);
    } else if (auto* su = std::get_if<Sum>(&e->node)) {
        os << pad << "Sum\n";
        for (const auto& t : su->terms) dump(t, os, indent + 1);
    } else if (auto* me = std::get_if<MatrixElement>(&e->node)) {
        os << pad << "MatrixElement "
           << (me->origin == MEOrigin::BraketChained ? "braket-chained" : "slash-dotless") << "\n";
        dump(me->bra, os, indent + 1);
        dump_op(me->op, os, indent + 1);
        dump(me->ket, os, indent + 1);
    } else if (auto* r = std::get_if<ReducedMatrixElement>(&e->node)) {
        os << pad << "ReducedMatrixElement " << r->bra << " || " << r->op << " || " << r->ket
           << "\n";
    } else if (auto* sa = std::get_if<ScalarAtom>(&e->node)) {
        os << pad << "ScalarAtom\n";
        dump_scalar(sa->value, os, indent + 1);
    } else {
        os << pad << "Operator\n";
        dump_op(std::get<OpAtom>(e->node).op, os, indent + 1);
    }
}

void dump_op(const OpPtr& op, std::ostream& os, int indent) {
    std::string pad(2 * indent, ' ');
    if (auto* s = std::get_if<OpSymbol>(&op->node)) {
        os << pad << "Symbol " << s->name << "\n";
    } else if (auto* d = std::get_if<OpDagger>(&op->node)) {
        os << pad << "Dagger\n";
        dump_op(d->inner, os, indent + 1);
    } else if (auto* c = std::get_if<OpCompose>(&op->node)) {
        os << pad << "Compose\n";
        for (const auto& f : c->factors) dump_op(f, os, indent + 1);
    } else if (auto* i = std::get_if<OpIdentity>(&op->node)) {
        os << pad << "Identity" << (i->basis.empty() ? "" : "[" + i->basis + "]") << "\n";
    } else {
        const auto& o = std::get<OpOuter>(op->node);
        os << pad << "OuterOp\n";
        dump(o.ket, os, indent + 1);
        dump(o.bra, os, indent + 1);
    }
}

void dump_scalar(const ScalarPtr& s, std::ostream& os, int indent) {
    std::string pad(2 * indent, ' ');
    if (auto* l = std::get_if<ScalarLiteral>(&s->node)) {
        os << pad << "Literal " << format_complex(l->value) << "\n";
    } else if (auto* c = std::get_if<ScalarConj>(&s->node)) {
        os << pad << "Conj\n";
        dump_scalar(c->inner, os, indent + 1);
    } else if (auto* t = std::get_if<ScalarTimes>(&s->node)) {
        os << pad << "Times\n";
        for (const auto& f : t->factors) dump_scalar(f, os, indent + 1);
    } else {
        os << pad << "ScalarProductRef\n";
        dump(std::get<ScalarRef>(s->node).expr, os, indent + 1);
    }
}

json value_json(const Value& v) {
    json j;
    j["kind"] = v.kind == Value::Kind::Scalar     ? "scalar"
                : v.kind == Value::Kind::Vector   ? "vector"
                : v.kind == Value::Kind::Covector ? "covector"
                                                  : "matrix";
    if (v.kind == Value::Kind::Scalar) {
        j["re"] = v.scalar.real();
        j["im"] = v.scalar.imag();
    } else if (v.kind == Value::Kind::Matrix) {
        json rows = json::array();
        for (const auto& row : v.matrix) {
            json r = json::array();
            for (const auto& x : row) r.push_back({{"re", x.real()}, {"im", x.imag()}});
            rows.push_back(r);
        }
        j["entries"] = rows;
    } else {
        json c = json::array();
        for (const auto& x : v.coeffs) c.push_back({{"re", x.real()}, {"im", x.imag()}});
        j["coeffs"] = c;
    }
    if (v.truncation) j["N"] = *v.truncation;
    if (v.forced) j["forced"] = true;
    return j;
}

std::string value_text(const Value& v) {
    std::ostringstream os;
    switch (v.kind) {
        case Value::Kind::Scalar: os << "scalar: " << format_complex(v.scalar); break;
        case Value::Kind::Vector:
        case Value::Kind::Covector: {
            os << (v.kind == Value::Kind::Vector ? "vector:" : "covector:");
            for (const auto& x : v.coeffs) os << " " << format_complex(x);
            break;
        }
        case Value::Kind::Matrix: {
            os << "matrix:";
            for (const auto& row : v.matrix) {
                os << "\n ";
                for (const auto& x : row) os << " " << format_complex(x);
            }
            break;
        }
    }
    if (v.truncation) os << "  (N=" << *v.truncation << ")";
    if (v.forced) os << "  [forced]";
    return os.str();
}

json sweep_json(const SweepReport& r) {
    json j;
    j["levels"] = r.levels;
    j["magnitudes"] = r.magnitudes;
    j["verdict"] = verdict_word(r.verdict);
    j["fitted_exponent"] = r.fitted_exponent;
    return j;
}

json diag_json(const Diagnostic& d, std::size_t line) {
    json j;
    j["severity"] = check_detail::severity_word(d.severity);
    j["rule"] = d.rule;
    j["line"] = line;
    j["col"] = d.span.column;
    j["message"] = d.message;
    if (d.suggestion) j["suggestion"] = render_slash(d.suggestion);
    return j;
}

struct CommonOpts {
    std::string expr;
    std::vector<std::string> files;
    std::string model_path;
    std::string hint = "auto";
    std::string format = "text";
    std::uint64_t seed = 42;
    std::vector<std::size_t> levels;
    bool force = false;
    bool plot_data = false;
};

HilbertModel load_model_file(const std::string& path) {
    return load_model(read_file(path));
}

std::vector<std::size_t> default_levels(const HilbertModel& m, const std::vector<std::size_t>& cli) {
    if (!cli.empty()) return cli;
    return m.levels;
}

// ---- subcommand bodies -------------------------------------------------------

int cmd_parse(const CommonOpts& o) {
    Inputs in = gather(o.expr, o.files);
    bool structured = o.format == "structured";
    int status = 0;
    for (const auto& [lineno, text] : in.lines) {
        try {
            ParseResult r = parse(text, hint_of(o.hint), lineno);
            if (structured) {
                json j;
                j["line"] = lineno;
                j["notation"] = r.notation == Notation::Slash ? "slash" : "braket";
                j["canonical"] = r.notation == Notation::Slash
                                     ? render_slash(r.expr)
                                     : render_braket(r.expr).text;
                std::cout << j.dump() << "\n";
            } else {
                std::cout << "notation: " << (r.notation == Notation::Slash ? "slash" : "braket")
                          << "\n";
                dump(r.expr, std::cout);
            }
        } catch (const ParseError& e) {
            status = kExitParse;
            std::cerr << "parse error " << lineno << ":" << e.span.column << " " << e.what()
                      << "\n";
        }
    }
    return status;
}

int cmd_check(const CommonOpts& o, bool right_action) {
    HilbertModel m;
    try {
        m = load_model_file(o.model_path);
    } catch (const std::exception& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return kExitModel;
    }
    Inputs in = gather(o.expr, o.files);
    bool structured = o.format == "structured";
    int status = 0;
    for (const auto& [lineno, text] : in.lines) {
        ParseResult r;
        try {
            r = parse(text, hint_of(o.hint), lineno);
        } catch (const ParseError& e) {
            status = std::max(status, kExitParse);
            std::cerr << "parse error " << lineno << ":" << e.span.column << " " << e.what()
                      << "\n";
            continue;
        }
        auto diags = check(r.expr, m, {r.notation, right_action});
        for (const auto& d : diags) {
            if (d.severity == Severity::Error) status = std::max(status, kExitCheck);
            if (structured) {
                std::cout << diag_json(d, lineno).dump() << "\n";
            } else {
                std::cout << colorize(d.severity, format_diagnostic(d)) << "\n";
            }
        }
    }
    return status;
}

int cmd_convert(const CommonOpts& o, const std::string& target, bool show_trace) {
    std::optional<HilbertModel> m;
    if (!o.model_path.empty()) {
        try {
            m = load_model_file(o.model_path);
        } catch (const std::exception& e) {
            std::cerr << "model error: " << e.what() << "\n";
            return kExitModel;
        }
    }
    LinearityOracle oracle;
    if (m) oracle = oracle_from(*m);
    Inputs in = gather(o.expr, o.files);
    bool structured = o.format == "structured";
    int status = 0;
    for (const auto& [lineno, text] : in.lines) {
        ParseResult r;
        try {
            r = parse(text, hint_of(o.hint), lineno);
        } catch (const ParseError& e) {
            status = std::max(status, kExitParse);
            std::cerr << "parse error " << lineno << ":" << e.span.column << " " << e.what()
                      << "\n";
            continue;
        }
        std::string out_text;
        std::optional<std::string> unrep;
        std::vector<std::string> notes;
        Notation n = (target == "slash" || target == "latex-slash") ? Notation::Slash
                                                                    : Notation::Braket;
        ConvertResult c = convert(r.expr, n, oracle);
        notes = c.notes;
        if (n == Notation::Braket && c.unrepresentable) {
            unrep = c.unrepresentable;
        } else if (target == "slash") {
            out_text = render_slash(c.expr);
        } else if (target == "braket") {
            out_text = render_braket(c.expr, oracle).text;
        } else {
            out_text = render_latex(c.expr, n == Notation::Slash ? LatexDialect::Slash
                                                                 : LatexDialect::Braket);
        }
        if (unrep) status = std::max(status, kExitCheck);
        if (structured) {
            json j;
            j["line"] = lineno;
            if (unrep) j["unrepresentable"] = *unrep;
            else j["text"] = out_text;
            if (!notes.empty()) j["notes"] = notes;
            if (show_trace) {
                json steps = json::array();
                for (const auto& s : c.trace.steps) steps.push_back(s.rule);
                j["trace"] = steps;
            }
            std::cout << j.dump() << "\n";
        } else if (unrep) {
            std::cout << "unrepresentable: " << *unrep << "\n";
        } else {
            std::cout << out_text << "\n";
            if (show_trace) std::cout << trace_lines(c.trace, n);
            for (const auto& note : notes) std::cerr << "note: " << note << "\n";
        }
    }
    return status;
}

int cmd_eval(const CommonOpts& o) {
    HilbertModel m;
    try {
        m = load_model_file(o.model_path);
    } catch (const std::exception& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return kExitModel;
    }
    Inputs in = gather(o.expr, o.files);
    bool structured = o.format == "structured";
    int status = 0;
    for (const auto& [lineno, text] : in.lines) {
        ParseResult r;
        try {
            r = parse(text, hint_of(o.hint), lineno);
        } catch (const ParseError& e) {
            status = std::max(status, kExitParse);
            std::cerr << "parse error " << lineno << ":" << e.span.column << " " << e.what()
                      << "\n";
            continue;
        }
        auto diags = check(r.expr, m, {r.notation, false});
        bool has_error = false;
        for (const auto& d : diags)
            if (d.severity == Severity::Error) has_error = true;
        if (has_error && !o.force) {
            status = std::max(status, kExitCheck);
            for (const auto& d : diags)
                std::cerr << colorize(d.severity, format_diagnostic(d)) << "\n";
            std::cerr << "evaluation refused; pass --force to evaluate anyway\n";
            continue;
        }
        try {
            if (m.truncated() && default_levels(m, o.levels).size() > 1 && o.levels.size() != 1) {
                // several truncation levels: run the sweep
                SweepReport rep = truncation_sweep(r.expr, m, default_levels(m, o.levels));
                if (structured) std::cout << sweep_json(rep).dump() << "\n";
                else if (o.plot_data) std::cout << sweep_table(rep, '\t', false);
                else std::cout << sweep_table(rep);
            } else {
                EvalOptions opts;
                if (m.truncated()) opts.truncation = default_levels(m, o.levels).front();
                opts.force = has_error;
                Value v = evaluate(r.expr, m, opts);
                if (structured) std::cout << value_json(v).dump() << "\n";
                else std::cout << value_text(v) << "\n";
            }
        } catch (const std::exception& e) {
            status = std::max(status, kExitCheck);
            std::cerr << "evaluation error: " << e.what() << "\n";
        }
    }
    return status;
}

HilbertModel paper_scenario_model() {
    return load_model(
        "[space]\nkind = truncated\nlevels = 16, 256, 4096\n"
        "[state u]\ndecay q = 0.75\n[state v]\ndecay q = 3\n[operator P]\ndiagonal p = 1\n");
}

int cmd_demo(const CommonOpts& o, const std::string& scenario, std::size_t dim) {
    bool structured = o.format == "structured";
    if (scenario == "unbounded") {
        HilbertModel m = paper_scenario_model();
        std::vector<std::size_t> levels = o.levels.empty() ? m.levels : o.levels;
        SweepReport r = unboundedness_probe(m, "u", "P", levels);
        if (structured) std::cout << sweep_json(r).dump() << "\n";
        else {
            std::cout << "sup over basis states of |(u, P e_n)| per truncation:\n"
                      << sweep_table(r);
        }
        return r.verdict == SweepReport::Verdict::Divergent ? 0 : kExitCheck;
    }
    if (scenario == "hellinger") {
        HilbertModel m = paper_scenario_model();
        std::vector<std::size_t> levels = o.levels.empty() ? std::vector<std::size_t>{10, 100, 1000}
                                                           : o.levels;
        SweepReport r = operator_norm_sweep(m, "P", levels);
        if (structured) std::cout << sweep_json(r).dump() << "\n";
        else {
            std::cout << "norm of the N-truncation of P (everywhere-defined, unbounded):\n"
                      << sweep_table(r);
        }
        return r.verdict == SweepReport::Verdict::Divergent ? 0 : kExitCheck;
    }
    if (scenario == "riesz") {
        Rng rng(o.seed);
        double worst = 0.0;
        std::ostringstream model_text;
        model_text << "[space]\nkind = finite\ndim = " << dim << "\n";
        HilbertModel m = load_model(model_text.str());
        for (int trial = 0; trial < 100; ++trial) {
            cvec f = rng.vector(dim);
            RieszResult r = riesz_solve(m, f);
            worst = std::max(worst, r.residual);
        }
        if (structured) {
            json j;
            j["dim"] = dim;
            j["trials"] = 100;
            j["max_residual"] = worst;
            std::cout << j.dump() << "\n";
        } else {
            std::cout << "riesz: 100 random functionals on dim " << dim
                      << ", max residual = " << worst << "\n";
        }
        return worst <= 1e-12 ? 0 : kExitCheck;
    }
    if (scenario == "schwarz") {
        Rng rng(o.seed);
        int violations = 0;
        double worst_margin = 0.0;
        for (int trial = 0; trial < 1000; ++trial) {
            std::size_t d = 2 + rng.index(15);  // dims 2..16
            cvec u = rng.vector(d), v = rng.vector(d);
            double lhs = std::abs(inner(u, v));
            double rhs = norm(u) * norm(v);
            if (lhs > rhs + 1e-12) ++violations;
            worst_margin = std::max(worst_margin, lhs - rhs);
        }
        if (structured) {
            json j;
            j["trials"] = 1000;
            j["violations"] = violations;
            j["worst_margin"] = worst_margin;
            std::cout << j.dump() << "\n";
        } else {
            std::cout << "schwarz: 1000 random pairs, violations = " << violations
                      << ", worst |(u,v)| - |u||v| = " << worst_margin << "\n";
        }
        return violations == 0 ? 0 : kExitCheck;
    }
    std::cerr << "unknown demo scenario '" << scenario << "'\n";
    return kExitModel;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"representation-free notation toolkit"};
    app.require_subcommand(1);

    CommonOpts o;
    std::string target, scenario, rule;
    std::size_t dim = 8;
    bool right_action = false;

    auto add_common = [&](CLI::App* cmd, bool with_model) {
        cmd->add_option("-e,--expr", o.expr, "inline expression");
        cmd->add_option("files", o.files, "expression files, one per line");
        cmd->add_option("--hint", o.hint, "notation hint: auto|slash|braket")
            ->check(CLI::IsMember({"auto", "slash", "braket"}));
        cmd->add_option("--format", o.format, "output format: text|structured")
            ->check(CLI::IsMember({"text", "structured"}));
        cmd->add_option("--seed", o.seed, "random seed");
        cmd->add_option("-N,--levels", o.levels, "truncation level list")->delimiter(',');
        if (with_model) cmd->add_option("-m,--model", o.model_path, "model file");
    };

    CLI::App* parse_cmd = app.add_subcommand("parse", "parse expressions and dump the AST");
    add_common(parse_cmd, false);

    CLI::App* check_cmd = app.add_subcommand("check", "check well-formedness against a model");
    add_common(check_cmd, true);
    check_cmd->add_flag("--right-action", right_action,
                        "enable the operators-act-right comparison convention");

    CLI::App* convert_cmd = app.add_subcommand("convert", "convert between notations");
    add_common(convert_cmd, true);
    bool show_trace = false;
    convert_cmd->add_flag("--trace", show_trace, "print the numbered rewrite steps");
    convert_cmd
        ->add_option("--to", target, "target: slash|braket|latex-slash|latex-braket")
        ->required()
        ->check(CLI::IsMember({"slash", "braket", "latex-slash", "latex-braket"}));

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate expressions on a model");
    add_common(eval_cmd, true);
    eval_cmd->add_flag("--force", o.force, "evaluate even when the checker reports errors");
    eval_cmd->add_flag("--plot", o.plot_data, "emit sweeps as tab-separated plot data");

    CLI::App* demo_cmd = app.add_subcommand("demo", "run a named demonstration");
    demo_cmd->add_option("scenario", scenario, "unbounded|riesz|hellinger|schwarz")->required();
    demo_cmd->add_option("--dim", dim, "dimension for the riesz demo");
    add_common(demo_cmd, false);

    CLI::App* explain_cmd = app.add_subcommand("explain", "explain a checker rule");
    explain_cmd->add_option("rule", rule, "rule identifier, e.g. BK1")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (parse_cmd->parsed()) return cmd_parse(o);
        if (check_cmd->parsed()) {
            if (o.model_path.empty()) {
                std::cerr << "check needs a model (-m)\n";
                return kExitModel;
            }
            return cmd_check(o, right_action);
        }
        if (convert_cmd->parsed()) return cmd_convert(o, target, show_trace);
        if (eval_cmd->parsed()) {
            if (o.model_path.empty()) {
                std::cerr << "eval needs a model (-m)\n";
                return kExitModel;
            }
            return cmd_eval(o);
        }
        if (demo_cmd->parsed()) return cmd_demo(o, scenario, dim);
        if (explain_cmd->parsed()) {
            try {
                std::cout << explain(rule) << "\n";
                return 0;
            } catch (const std::invalid_argument& e) {
                std::cerr << e.what() << "\n";
                return kExitModel;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitModel;
    }
    return 0;
}
