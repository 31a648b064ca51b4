#pragma once

// Shared helpers for the test suite. The naive_* functions are independent
// oracles: they recompute results with plain index-tuple loops (no strides,
// no shared code with the library) so expected values are derived twice.

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "qml/algebra.hpp"

namespace testutil {

using qml::Complex;
using qml::Ket;
using qml::Operator;
using qml::SpaceShape;

// --- index tuples ----------------------------------------------------------

// Visit every index tuple of the given dims in row-major order.
inline void for_each_tuple(const std::vector<std::size_t>& dims,
                           const std::function<void(const std::vector<std::size_t>&)>& fn) {
    std::vector<std::size_t> t(dims.size(), 0);
    while (true) {
        fn(t);
        std::size_t f = dims.size();
        while (f > 0) {
            --f;
            if (++t[f] < dims[f]) break;
            t[f] = 0;
            if (f == 0) return;
        }
    }
}

inline std::size_t flat_of(const std::vector<std::size_t>& dims,
                           const std::vector<std::size_t>& tuple) {
    std::size_t idx = 0;
    for (std::size_t f = 0; f < dims.size(); ++f) idx = idx * dims[f] + tuple[f];
    return idx;
}

// --- naive oracles ---------------------------------------------------------

inline Complex naive_inner(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    Complex s(0, 0);
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

inline std::vector<Complex> naive_tensor(const std::vector<Complex>& a,
                                         const std::vector<Complex>& b) {
    std::vector<Complex> out;
    out.reserve(a.size() * b.size());
    for (const Complex& x : a)
        for (const Complex& y : b) out.push_back(x * y);
    return out;
}

// Kronecker product of square matrices (row-major).
inline std::vector<Complex> naive_kron(const std::vector<Complex>& a, std::size_t an,
                                       const std::vector<Complex>& b, std::size_t bn) {
    std::size_t n = an * bn;
    std::vector<Complex> out(n * n);
    for (std::size_t i = 0; i < an; ++i)
        for (std::size_t j = 0; j < an; ++j)
            for (std::size_t k = 0; k < bn; ++k)
                for (std::size_t l = 0; l < bn; ++l)
                    out[(i * bn + k) * n + (j * bn + l)] = a[i * an + j] * b[k * bn + l];
    return out;
}

inline std::vector<Complex> naive_matvec(const std::vector<Complex>& m, std::size_t n,
                                         const std::vector<Complex>& v) {
    std::vector<Complex> out(n, Complex(0, 0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i] += m[i * n + j] * v[j];
    return out;
}

inline std::vector<Complex> naive_matmul(const std::vector<Complex>& a,
                                         const std::vector<Complex>& b, std::size_t n) {
    std::vector<Complex> out(n * n, Complex(0, 0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += a[i * n + k] * b[k * n + j];
    return out;
}

// Contraction over the fixed positions, computed tuple by tuple.
inline std::vector<Complex> naive_partial(const std::vector<std::size_t>& dims,
                                          const std::vector<std::size_t>& fixed_at,
                                          const std::vector<Complex>& fixed,
                                          const std::vector<Complex>& psi) {
    std::vector<std::size_t> rest_pos;
    for (std::size_t f = 0; f < dims.size(); ++f)
        if (std::find(fixed_at.begin(), fixed_at.end(), f) == fixed_at.end())
            rest_pos.push_back(f);

    std::vector<std::size_t> rest_dims, fixed_dims;
    for (std::size_t f : rest_pos) rest_dims.push_back(dims[f]);
    for (std::size_t f : fixed_at) fixed_dims.push_back(dims[f]);

    std::size_t out_size = 1;
    for (std::size_t d : rest_dims) out_size *= d;
    std::vector<Complex> out(out_size, Complex(0, 0));

    for_each_tuple(rest_dims, [&](const std::vector<std::size_t>& jt) {
        Complex acc(0, 0);
        for_each_tuple(fixed_dims, [&](const std::vector<std::size_t>& it) {
            std::vector<std::size_t> full(dims.size());
            for (std::size_t f = 0; f < fixed_at.size(); ++f) full[fixed_at[f]] = it[f];
            for (std::size_t f = 0; f < rest_pos.size(); ++f) full[rest_pos[f]] = jt[f];
            acc += psi[flat_of(dims, full)] * std::conj(fixed[flat_of(fixed_dims, it)]);
        });
        out[flat_of(rest_dims, jt)] = acc;
    });
    return out;
}

// Factor permutation by explicit index remapping: new factor i is old
// factor order[i].
inline std::vector<Complex> naive_permute(const std::vector<std::size_t>& dims,
                                          const std::vector<std::size_t>& order,
                                          const std::vector<Complex>& amps) {
    std::vector<std::size_t> new_dims;
    for (std::size_t f : order) new_dims.push_back(dims[f]);
    std::vector<Complex> out(amps.size());
    for_each_tuple(new_dims, [&](const std::vector<std::size_t>& nt) {
        std::vector<std::size_t> ot(dims.size());
        for (std::size_t f = 0; f < order.size(); ++f) ot[order[f]] = nt[f];
        out[flat_of(new_dims, nt)] = amps[flat_of(dims, ot)];
    });
    return out;
}

// Eigenvalues (descending) of a real symmetric matrix by cyclic Jacobi sweeps.
inline std::vector<double> naive_eigs_symmetric(std::vector<double> a, std::size_t n) {
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += std::abs(a[p * n + q]);
        if (off < 1e-15) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                double tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t), s = t * c;
                for (std::size_t r = 0; r < n; ++r) {
                    double arp = a[r * n + p], arq = a[r * n + q];
                    a[r * n + p] = c * arp - s * arq;
                    a[r * n + q] = s * arp + c * arq;
                }
                for (std::size_t r = 0; r < n; ++r) {
                    double apr = a[p * n + r], aqr = a[q * n + r];
                    a[p * n + r] = c * apr - s * aqr;
                    a[q * n + r] = s * apr + c * aqr;
                }
            }
        }
    }
    std::vector<double> eigs(n);
    for (std::size_t i = 0; i < n; ++i) eigs[i] = a[i * n + i];
    std::sort(eigs.begin(), eigs.end(), std::greater<double>());
    return eigs;
}

// Eigenvalues of a complex Hermitian matrix, via the real embedding
// [[Re, -Im], [Im, Re]] whose spectrum is that of H with every value doubled.
inline std::vector<double> naive_eigs_hermitian(const std::vector<Complex>& h, std::size_t n) {
    std::vector<double> r(4 * n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double re = h[i * n + j].real(), im = h[i * n + j].imag();
            r[i * 2 * n + j] = re;
            r[(i + n) * 2 * n + (j + n)] = re;
            r[(i + n) * 2 * n + j] = im;
            r[i * 2 * n + (j + n)] = -im;
        }
    }
    auto all = naive_eigs_symmetric(std::move(r), 2 * n);
    std::vector<double> eigs(n);
    for (std::size_t i = 0; i < n; ++i) eigs[i] = all[2 * i]; // every value appears twice
    return eigs;
}

// Singular values (descending) of a d1 x d2 complex matrix via the smaller
// Gram matrix. Brute force; plenty for the product-state criterion.
inline std::vector<double> naive_singular_values(const std::vector<Complex>& m, std::size_t d1,
                                                 std::size_t d2) {
    std::size_t n = std::min(d1, d2);
    std::vector<Complex> g(n * n, Complex(0, 0));
    if (d1 <= d2) {
        for (std::size_t i = 0; i < d1; ++i)         // G = M M†
            for (std::size_t j = 0; j < d1; ++j)
                for (std::size_t k = 0; k < d2; ++k)
                    g[i * n + j] += m[i * d2 + k] * std::conj(m[j * d2 + k]);
    } else {
        for (std::size_t i = 0; i < d2; ++i)         // G = M†M
            for (std::size_t j = 0; j < d2; ++j)
                for (std::size_t k = 0; k < d1; ++k)
                    g[i * n + j] += std::conj(m[k * d2 + i]) * m[k * d2 + j];
    }
    auto eigs = naive_eigs_hermitian(g, n);
    std::vector<double> sv(n);
    for (std::size_t i = 0; i < n; ++i) sv[i] = std::sqrt(std::max(0.0, eigs[i]));
    return sv;
}

// --- random generators -----------------------------------------------------

inline Complex random_amp(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    return Complex(d(rng), d(rng));
}

inline std::vector<Complex> random_amps(std::mt19937_64& rng, std::size_t n) {
    std::vector<Complex> a(n);
    for (Complex& c : a) c = random_amp(rng);
    return a;
}

inline Ket random_ket(std::mt19937_64& rng, std::vector<std::size_t> dims) {
    SpaceShape shape(dims);
    auto amps = random_amps(rng, shape.total_dim());
    // Re-roll the (measure-zero) case of a vector too close to zero.
    Ket k(shape, amps);
    while (k.norm() < 1e-3) k = Ket(shape, random_amps(rng, shape.total_dim()));
    return k;
}

// Random unitary via Gram-Schmidt on a random complex matrix.
inline Operator random_unitary(std::mt19937_64& rng, std::size_t dim) {
    while (true) {
        std::vector<std::vector<Complex>> cols(dim, std::vector<Complex>(dim));
        for (auto& col : cols)
            for (Complex& c : col) c = random_amp(rng);
        bool ok = true;
        for (std::size_t i = 0; i < dim && ok; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                Complex proj = naive_inner(cols[j], cols[i]);
                for (std::size_t r = 0; r < dim; ++r) cols[i][r] -= proj * cols[j][r];
            }
            double n = std::sqrt(naive_inner(cols[i], cols[i]).real());
            if (n < 1e-6) { ok = false; break; }
            for (std::size_t r = 0; r < dim; ++r) cols[i][r] /= n;
        }
        if (!ok) continue;
        std::vector<Complex> entries(dim * dim);
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = 0; c < dim; ++c) entries[r * dim + c] = cols[c][r];
        return Operator(dim, std::move(entries));
    }
}

inline double dist_max(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::max(std::abs((a[i] - b[i]).real()), std::abs((a[i] - b[i]).imag())));
    return m;
}

} // namespace testutil
