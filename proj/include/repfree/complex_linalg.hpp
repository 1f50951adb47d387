// Small dense complex linear algebra used by the model and evaluator.
// Dimensions stay desk-scale (<= a few hundred), so plain vectors of
// vectors are enough; no external BLAS dependency.
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

namespace repfree {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using cmat = std::vector<cvec>;  // row-major, rectangular

inline cplx inner(const cvec& u, const cvec& v) {
    if (u.size() != v.size()) throw std::invalid_argument("inner: size mismatch");
    cplx acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += std::conj(u[i]) * v[i];
    return acc;
}

inline double norm(const cvec& u) { return std::sqrt(std::abs(inner(u, u))); }

inline cvec conj(const cvec& u) {
    cvec r(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) r[i] = std::conj(u[i]);
    return r;
}

inline cvec scale(const cplx& c, const cvec& u) {
    cvec r(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) r[i] = c * u[i];
    return r;
}

inline cvec add(const cvec& u, const cvec& v) {
    if (u.size() != v.size()) throw std::invalid_argument("add: size mismatch");
    cvec r(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) r[i] = u[i] + v[i];
    return r;
}

inline cmat zeros(std::size_t rows, std::size_t cols) {
    return cmat(rows, cvec(cols, cplx(0.0, 0.0)));
}

inline cmat identity_matrix(std::size_t n) {
    cmat m = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
    return m;
}

inline cvec matvec(const cmat& m, const cvec& v) {
    if (!m.empty() && m.front().size() != v.size())
        throw std::invalid_argument("matvec: size mismatch");
    cvec r(m.size(), cplx(0.0, 0.0));
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) r[i] += m[i][j] * v[j];
    return r;
}

inline cmat matmul(const cmat& a, const cmat& b) {
    if (a.empty() || b.empty()) return {};
    if (a.front().size() != b.size()) throw std::invalid_argument("matmul: size mismatch");
    cmat r = zeros(a.size(), b.front().size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b.front().size(); ++j) r[i][j] += a[i][k] * b[k][j];
    return r;
}

// Conjugate transpose.
inline cmat dagger(const cmat& m) {
    if (m.empty()) return {};
    cmat r = zeros(m.front().size(), m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.front().size(); ++j) r[j][i] = std::conj(m[i][j]);
    return r;
}

inline cmat transpose(const cmat& m) {
    if (m.empty()) return {};
    cmat r = zeros(m.front().size(), m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.front().size(); ++j) r[j][i] = m[i][j];
    return r;
}

// |k><b| as a matrix: entry (i,j) = k_i * conj(b_j).
inline cmat rank_one(const cvec& k, const cvec& b) {
    cmat r = zeros(k.size(), b.size());
    for (std::size_t i = 0; i < k.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i][j] = k[i] * std::conj(b[j]);
    return r;
}

inline cmat mat_add(const cmat& a, const cmat& b) {
    if (a.size() != b.size()) throw std::invalid_argument("mat_add: size mismatch");
    cmat r = a;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) r[i][j] += b[i][j];
    return r;
}

inline cmat mat_scale(const cplx& c, const cmat& a) {
    cmat r = a;
    for (auto& row : r)
        for (auto& x : row) x *= c;
    return r;
}

inline double max_abs_diff(const cmat& a, const cmat& b) {
    if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) throw std::invalid_argument("max_abs_diff: size mismatch");
        for (std::size_t j = 0; j < a[i].size(); ++j)
            m = std::max(m, std::abs(a[i][j] - b[i][j]));
    }
    return m;
}

inline double max_abs_diff(const cvec& a, const cvec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Seeded generators for the randomized suites. All randomized checks take
// an explicit seed so runs are reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double real(double lo = -1.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }
    cplx complex_unit_box() { return cplx(real(), real()); }
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_);
    }
    cvec vector(std::size_t n) {
        cvec v(n);
        for (auto& x : v) x = complex_unit_box();
        return v;
    }
    cmat matrix(std::size_t rows, std::size_t cols) {
        cmat m(rows);
        for (auto& row : m) row = vector(cols);
        return m;
    }
    // Random orthonormal set via Gram-Schmidt on random vectors.
    cmat unitary(std::size_t n) {
        cmat q;
        while (q.size() < n) {
            cvec v = vector(n);
            for (const auto& u : q) {
                cplx c = inner(u, v);
                for (std::size_t i = 0; i < n; ++i) v[i] -= c * u[i];
            }
            double nv = norm(v);
            if (nv < 1e-8) continue;  // nearly dependent draw, retry
            for (auto& x : v) x /= nv;
            q.push_back(std::move(v));
        }
        return q;
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

}  // namespace repfree
