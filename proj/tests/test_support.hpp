// Shared test helpers: seeded well-typed expression generators, random
// finite models, data paths and a tiny process runner for CLI tests.
#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "repfree/repfree.hpp"

namespace testsupport {

using namespace repfree;

inline std::string data_path(const std::string& name) {
    return std::string(REPFREE_DATA_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline HilbertModel load_data_model(const std::string& name) {
    return load_model(read_file(data_path(name)));
}

// A random finite model: `dim` orthonormal basis states b0..b{dim-1} plus
// random states xi, psi and random operators O, A (linear) and K
// (conjugation, anti-linear).
inline HilbertModel random_finite_model(std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    HilbertModel m;
    m.kind = HilbertModel::Kind::Finite;
    m.dim = dim;
    cmat basis = rng.unitary(dim);
    BasisDef b;
    b.name = "b";
    for (std::size_t i = 0; i < dim; ++i) {
        std::string label = "b" + std::to_string(i);
        m.states[label] = StateDef{label, basis[i], 0.0, PhaseRule::None};
        b.states.push_back(label);
    }
    m.bases["b"] = b;
    for (const char* label : {"xi", "psi", "u", "v", "w", "m", "n"})
        m.states[label] = StateDef{label, rng.vector(dim), 0.0, PhaseRule::None};
    for (const char* sym : {"O", "A", "P", "B"})
        m.operators[sym] = OperatorSpec{sym, Linearity::Linear, rng.matrix(dim, dim), 0.0, false, {}};
    m.operators["K"] =
        OperatorSpec{"K", Linearity::AntiLinear, identity_matrix(dim), 0.0, false, {}};
    return m;
}

// ---- seeded well-typed expression generator ---------------------------------

// Generates trees that the slash renderer round-trips exactly; the braket
// flavor restricts to bra-ket-native structures (dagger-headed bra chains,
// state-labelled matrix elements).
class ExprGen {
public:
    ExprGen(std::uint64_t seed, bool braket_flavor = false)
        : gen_(seed), braket_(braket_flavor) {}

    ExprPtr expr(int depth = 4) {
        switch (pick(6)) {
            case 0: return vector_expr(depth);
            case 1: return scalar_expr(depth);
            case 2: return covector_expr(depth);
            case 3: return operator_expr(depth);
            case 4: return vector_expr(depth);
            default: return scalar_expr(depth);
        }
    }

    ExprPtr vector_expr(int depth) {
        if (depth <= 0) return state(label());
        switch (pick(braket_ ? 5 : 6)) {
            case 0: return state(label());
            case 1: return apply(opchain(depth - 1), vector_expr(0));
            case 2: return scaled(literal(), vector_expr(depth - 1), Attachment::BoundToState);
            case 3: return sum({vector_expr(depth - 1), vector_expr(depth - 1)});
            case 4: return apply(opchain(depth - 1), vector_expr(depth - 1));
            default:  // delimited scalar-product factor (slash only)
                return scaled(scalar_ref(sp_expr(depth - 1)), vector_expr(depth - 1),
                              Attachment::Delimited);
        }
    }

    ExprPtr covector_expr(int depth) {
        if (braket_) {
            if (pick(2) == 0) return covector(state(label()));
            return covector(apply(op_dagger(op_symbol(op_name())), state(label())));
        }
        return covector(vector_expr(depth - 1));
    }

    ExprPtr sp_expr(int depth) {
        return scalar_product(braket_ ? state(label()) : vector_expr(depth - 1),
                              vector_expr(depth - 1));
    }

    ExprPtr scalar_expr(int depth) {
        if (depth <= 0) return sp_expr(0);
        switch (pick(5)) {
            case 0: return sp_expr(depth);
            case 1:
                return matrix_element(state(label()), opchain(depth - 1), state(label()),
                                      braket_ ? MEOrigin::BraketChained : MEOrigin::SlashDotless);
            case 2: return scaled(literal(), sp_expr(depth - 1), Attachment::Delimited);
            case 3: return sum({scalar_expr(depth - 1), scalar_expr(depth - 1)});
            default: return scalar_atom(conj_scalar(scalar_ref(sp_expr(depth - 1))));
        }
    }

    ExprPtr operator_expr(int depth) {
        if (braket_ || pick(2) == 0) return outer(state(label()), state(label()));
        if (pick(2) == 0) return outer(vector_expr(depth - 1), vector_expr(depth - 1));
        return op_atom(opchain(depth));
    }

    OpPtr opchain(int depth) {
        if (depth <= 0 || pick(3) == 0) return op_symbol(op_name());
        switch (pick(3)) {
            case 0: return op_dagger(opchain(depth - 1));
            case 1: return op_compose({op_symbol(op_name()), op_symbol(op_name())});
            default: return op_symbol(op_name());
        }
    }

    ScalarPtr literal() {
        // quarter-integer parts render exactly
        double re = static_cast<double>(static_cast<int>(pick(17)) - 8) / 4.0;
        double im = static_cast<double>(static_cast<int>(pick(17)) - 8) / 4.0;
        return lit(cplx_t(re, im));
    }

    std::string label() {
        static const char* labels[] = {"u", "v", "w", "m", "n", "psi", "xi"};
        return labels[pick(7)];
    }
    std::string op_name() {
        static const char* ops[] = {"O", "P", "A", "B", "K"};
        return ops[pick(5)];
    }

private:
    std::mt19937_64 gen_;
    bool braket_;
    std::size_t pick(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_);
    }
};

// ---- CLI runner -----------------------------------------------------------

struct RunResult {
    int status = -1;
    std::string output;  // stdout + stderr interleaved
};

inline RunResult run_command(const std::string& command) {
    RunResult r;
    FILE* pipe = popen((command + " 2>&1").c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf;
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
    int rc = pclose(pipe);
    r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    return r;
}

}  // namespace testsupport
