#pragma once

// Dense complex linear algebra over small tensor-product spaces: kets with an
// explicit factor shape, unitary operators, contraction (partial application),
// and proportionality up to a global phase. Kets are *not* normalized here;
// judgements care about rays, so every comparison is ray-based.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace qml {

using Complex = std::complex<double>;

// Default tolerances. Zero tests scale by the norm of the vector under test,
// unitarity is an absolute max-norm bound on U†U - I, and proportionality is
// a bound on 1 - |cos| of the angle between rays.
inline constexpr double tol_zero = 1e-12;
inline constexpr double tol_unitary = 1e-9;
inline constexpr double tol_proportional = 1e-9;

// ---------------------------------------------------------------------------
// SpaceShape: ordered list of factor dimensions, each >= 2.

class SpaceShape {
public:
    explicit SpaceShape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
        if (dims_.empty())
            throw ShapeError("space shape needs at least one factor");
        for (std::size_t d : dims_)
            if (d < 2)
                throw ShapeError("factor dimension must be at least 2, got " + std::to_string(d));
    }

    static SpaceShape single(std::size_t dim) { return SpaceShape(std::vector<std::size_t>{dim}); }

    std::size_t factor_count() const { return dims_.size(); }
    std::size_t dim(std::size_t i) const { return dims_.at(i); }
    const std::vector<std::size_t>& dims() const { return dims_; }

    std::size_t total_dim() const {
        std::size_t n = 1;
        for (std::size_t d : dims_) n *= d;
        return n;
    }

    bool operator==(const SpaceShape& o) const { return dims_ == o.dims_; }

private:
    std::vector<std::size_t> dims_;
};

// ---------------------------------------------------------------------------
// Ket: dense amplitudes in row-major order over the shape's factors
// (last factor varies fastest). Amplitudes must be finite.

class Ket {
public:
    Ket(SpaceShape shape, std::vector<Complex> amps)
        : shape_(std::move(shape)), amps_(std::move(amps)) {
        if (amps_.size() != shape_.total_dim())
            throw ShapeError("amplitude count " + std::to_string(amps_.size()) +
                             " does not match space dimension " + std::to_string(shape_.total_dim()));
        for (const Complex& a : amps_)
            if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
                throw ShapeError("amplitudes must be finite");
    }

    // |index> in a single dim-sized factor.
    static Ket basis(std::size_t dim, std::size_t index) {
        if (index >= dim)
            throw ShapeError("basis index " + std::to_string(index) + " out of range for dim " +
                             std::to_string(dim));
        std::vector<Complex> a(dim, Complex(0, 0));
        a[index] = Complex(1, 0);
        return Ket(SpaceShape::single(dim), std::move(a));
    }

    const SpaceShape& shape() const { return shape_; }
    const std::vector<Complex>& amps() const { return amps_; }
    Complex amp(std::size_t i) const { return amps_.at(i); }
    std::size_t size() const { return amps_.size(); }

    double norm_sq() const {
        double s = 0;
        for (const Complex& a : amps_) s += std::norm(a);
        return s;
    }
    double norm() const { return std::sqrt(norm_sq()); }

    double max_abs() const {
        double m = 0;
        for (const Complex& a : amps_) m = std::max(m, std::abs(a));
        return m;
    }

    bool is_zero(double tol = tol_zero) const { return norm() <= tol; }

    Ket normalized() const {
        double n = norm();
        if (n <= tol_zero)
            throw ZeroVectorError("cannot normalize a zero vector");
        std::vector<Complex> a(amps_);
        for (Complex& c : a) c /= n;
        return Ket(shape_, std::move(a));
    }

    Ket scaled(Complex s) const {
        std::vector<Complex> a(amps_);
        for (Complex& c : a) c *= s;
        return Ket(shape_, std::move(a));
    }

    // Reinterpret the same amplitudes over a different factor structure with
    // equal total dimension (used when binding flat literals to a subject).
    Ket reshaped(SpaceShape s) const {
        if (s.total_dim() != shape_.total_dim())
            throw ShapeError("reshape changes total dimension");
        return Ket(std::move(s), amps_);
    }

private:
    SpaceShape shape_;
    std::vector<Complex> amps_;
};

// Componentwise comparison; complex numbers compare by the max of the
// component-wise absolute differences.
inline bool approx_equal(const Ket& a, const Ket& b, double tol) {
    if (a.shape().dims() != b.shape().dims()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        Complex d = a.amp(i) - b.amp(i);
        if (std::max(std::abs(d.real()), std::abs(d.imag())) > tol) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Operator: square matrix in row-major order. Construction verifies the
// unitarity invariant ||U†U - I||_max <= tol (every operator in this calculus
// is an evolution, so there is no use for non-unitary matrices).

class Operator {
public:
    Operator(std::size_t dim, std::vector<Complex> entries, double tol = tol_unitary)
        : dim_(dim), entries_(std::move(entries)) {
        if (dim_ == 0 || entries_.size() != dim_ * dim_)
            throw ShapeError("operator needs dim*dim entries");
        for (const Complex& e : entries_)
            if (!std::isfinite(e.real()) || !std::isfinite(e.imag()))
                throw ShapeError("operator entries must be finite");
        double defect = unitarity_defect();
        if (defect > tol)
            throw NotUnitaryError("operator is not unitary: max |U\xe2\x80\xa0U - I| = " +
                                  std::to_string(defect));
    }

    std::size_t dim() const { return dim_; }
    Complex at(std::size_t row, std::size_t col) const { return entries_.at(row * dim_ + col); }
    const std::vector<Complex>& entries() const { return entries_; }

    double unitarity_defect() const {
        double worst = 0;
        for (std::size_t i = 0; i < dim_; ++i) {
            for (std::size_t j = 0; j < dim_; ++j) {
                Complex s(0, 0);
                for (std::size_t k = 0; k < dim_; ++k)
                    s += std::conj(entries_[k * dim_ + i]) * entries_[k * dim_ + j];
                if (i == j) s -= Complex(1, 0);
                worst = std::max(worst, std::max(std::abs(s.real()), std::abs(s.imag())));
            }
        }
        return worst;
    }

    Operator dagger() const {
        std::vector<Complex> e(dim_ * dim_);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j)
                e[j * dim_ + i] = std::conj(entries_[i * dim_ + j]);
        return Operator(dim_, std::move(e));
    }

private:
    std::size_t dim_;
    std::vector<Complex> entries_;
};

// ---------------------------------------------------------------------------
// Basic operations.

// <a|b>, conjugating the first argument. Only total dimensions must agree;
// factor structure is irrelevant to the pairing.
inline Complex inner(const Ket& a, const Ket& b) {
    if (a.size() != b.size())
        throw ShapeError("inner product dimension mismatch: " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
    Complex s(0, 0);
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::conj(a.amp(i)) * b.amp(i);
    return s;
}

inline Ket tensor(const Ket& a, const Ket& b) {
    std::vector<std::size_t> dims = a.shape().dims();
    dims.insert(dims.end(), b.shape().dims().begin(), b.shape().dims().end());
    std::vector<Complex> amps(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            amps[i * b.size() + j] = a.amp(i) * b.amp(j);
    return Ket(SpaceShape(std::move(dims)), std::move(amps));
}

namespace detail {

// Row-major strides: stride[f] = product of dims after factor f.
inline std::vector<std::size_t> strides(const std::vector<std::size_t>& dims) {
    std::vector<std::size_t> s(dims.size(), 1);
    for (std::size_t f = dims.size(); f-- > 1;)
        s[f - 1] = s[f] * dims[f];
    return s;
}

inline void check_positions(std::span<const std::size_t> pos, std::size_t factor_count,
                            const char* who) {
    if (pos.empty())
        throw ShapeError(std::string(who) + ": empty factor index set");
    for (std::size_t i = 0; i < pos.size(); ++i) {
        if (pos[i] >= factor_count)
            throw ShapeError(std::string(who) + ": factor index " + std::to_string(pos[i]) +
                             " out of range");
        for (std::size_t j = i + 1; j < pos.size(); ++j)
            if (pos[i] == pos[j])
                throw ShapeError(std::string(who) + ": repeated factor index " +
                                 std::to_string(pos[i]));
    }
}

} // namespace detail

// Reorder tensor factors: new factor i is old factor order[i].
inline Ket permute_factors(const Ket& k, std::span<const std::size_t> order) {
    const auto& dims = k.shape().dims();
    if (order.size() != dims.size())
        throw ShapeError("permutation size does not match factor count");
    detail::check_positions(order, dims.size(), "permute_factors");

    std::vector<std::size_t> new_dims(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) new_dims[i] = dims[order[i]];
    auto old_strides = detail::strides(dims);
    auto new_strides = detail::strides(new_dims);

    std::vector<Complex> out(k.size());
    for (std::size_t idx = 0; idx < k.size(); ++idx) {
        std::size_t rest = idx, old_idx = 0;
        for (std::size_t f = 0; f < new_dims.size(); ++f) {
            std::size_t digit = rest / new_strides[f];
            rest %= new_strides[f];
            old_idx += digit * old_strides[order[f]];
        }
        out[idx] = k.amp(old_idx);
    }
    return Ket(SpaceShape(std::move(new_dims)), std::move(out));
}

// Apply U to the factors listed in `at` (U's own tensor order follows the
// order of `at`, so a CNOT applied at {2,0} has its control on factor 2).
// Untouched factors get the identity.
inline Ket apply_operator(const Operator& u, const Ket& k, std::span<const std::size_t> at) {
    const auto& dims = k.shape().dims();
    detail::check_positions(at, dims.size(), "apply_operator");

    std::size_t u_dim = 1;
    for (std::size_t p : at) u_dim *= dims[p];
    if (u_dim != u.dim())
        throw ShapeError("operator dim " + std::to_string(u.dim()) +
                         " does not match selected factors (product " + std::to_string(u_dim) + ")");

    auto strides = detail::strides(dims);
    std::vector<std::size_t> sel_dims(at.size());
    for (std::size_t i = 0; i < at.size(); ++i) sel_dims[i] = dims[at[i]];
    auto sel_strides = detail::strides(sel_dims);

    std::vector<Complex> out(k.size(), Complex(0, 0));
    for (std::size_t idx = 0; idx < k.size(); ++idx) {
        // Row index of U for this output element, and the flat index with the
        // selected digits zeroed so columns can be substituted in.
        std::size_t row = 0, base = idx;
        for (std::size_t i = 0; i < at.size(); ++i) {
            std::size_t digit = (idx / strides[at[i]]) % dims[at[i]];
            row += digit * sel_strides[i];
            base -= digit * strides[at[i]];
        }
        Complex acc(0, 0);
        for (std::size_t col = 0; col < u.dim(); ++col) {
            Complex coeff = u.at(row, col);
            if (coeff == Complex(0, 0)) continue;
            std::size_t in_idx = base;
            for (std::size_t i = 0; i < at.size(); ++i)
                in_idx += ((col / sel_strides[i]) % sel_dims[i]) * strides[at[i]];
            acc += coeff * k.amp(in_idx);
        }
        out[idx] = acc;
    }
    return Ket(k.shape(), std::move(out));
}

inline Ket apply_operator(const Operator& u, const Ket& k, std::size_t at) {
    std::size_t pos[1] = {at};
    return apply_operator(u, k, std::span<const std::size_t>(pos, 1));
}

// Partial application: contract `psi` with `fixed` on the factors listed in
// `fixed_at` (ascending). The result lives on the remaining factors, with
//
//     result[J] = sum_I psi[I,J] * conj(fixed[I])
//
// where I runs over the fixed positions and [I,J] interleaves both index
// groups back into psi's factor order. The map is antilinear in `fixed` and
// linear in `psi`; fixing several indices equals iterating single-index
// applications in ascending position order. Fixing every factor is the plain
// inner product and is rejected here.
inline Ket partial_apply(std::span<const std::size_t> fixed_at, const Ket& fixed, const Ket& psi) {
    const auto& dims = psi.shape().dims();
    detail::check_positions(fixed_at, dims.size(), "partial_apply");
    if (fixed_at.size() >= dims.size())
        throw ShapeError("partial_apply: cannot fix every factor (use inner instead)");
    for (std::size_t i = 0; i + 1 < fixed_at.size(); ++i)
        if (fixed_at[i] > fixed_at[i + 1])
            throw ShapeError("partial_apply: fixed positions must be ascending");

    std::vector<std::size_t> fixed_dims(fixed_at.size());
    for (std::size_t i = 0; i < fixed_at.size(); ++i) fixed_dims[i] = dims[fixed_at[i]];
    if (fixed.shape().dims() != fixed_dims)
        throw ShapeError("partial_apply: fixed ket shape does not match selected factors");

    std::vector<std::size_t> rest;
    for (std::size_t f = 0; f < dims.size(); ++f)
        if (std::find(fixed_at.begin(), fixed_at.end(), f) == fixed_at.end())
            rest.push_back(f);
    std::vector<std::size_t> rest_dims(rest.size());
    for (std::size_t i = 0; i < rest.size(); ++i) rest_dims[i] = dims[rest[i]];

    auto strides = detail::strides(dims);
    auto fixed_strides = detail::strides(fixed_dims);
    auto rest_strides = detail::strides(rest_dims);

    std::size_t out_size = 1;
    for (std::size_t d : rest_dims) out_size *= d;

    std::vector<Complex> out(out_size, Complex(0, 0));
    for (std::size_t j = 0; j < out_size; ++j) {
        std::size_t base = 0;
        for (std::size_t f = 0; f < rest.size(); ++f)
            base += ((j / rest_strides[f]) % rest_dims[f]) * strides[rest[f]];
        Complex acc(0, 0);
        for (std::size_t i = 0; i < fixed.size(); ++i) {
            std::size_t full = base;
            for (std::size_t f = 0; f < fixed_at.size(); ++f)
                full += ((i / fixed_strides[f]) % fixed_dims[f]) * strides[fixed_at[f]];
            acc += psi.amp(full) * std::conj(fixed.amp(i));
        }
        out[j] = acc;
    }
    return Ket(SpaceShape(std::move(rest_dims)), std::move(out));
}

inline Ket partial_apply(std::size_t fixed_at, const Ket& fixed, const Ket& psi) {
    std::size_t pos[1] = {fixed_at};
    return partial_apply(std::span<const std::size_t>(pos, 1), fixed, psi);
}

// Inverse of partial application's factor removal: place `fixed` back at the
// given positions alongside `rest`, restoring the full factor order.
inline Ket embed_at(std::span<const std::size_t> fixed_at, const Ket& fixed, const Ket& rest) {
    std::size_t total = fixed.shape().factor_count() + rest.shape().factor_count();
    detail::check_positions(fixed_at, total, "embed_at");
    if (fixed_at.size() != fixed.shape().factor_count())
        throw ShapeError("embed_at: position count does not match fixed ket");

    // tensor(fixed, rest) has factor order (fixed..., rest...); build the
    // permutation that moves each factor to its absolute position.
    std::vector<std::size_t> order(total);
    std::vector<bool> is_fixed(total, false);
    for (std::size_t i = 0; i < fixed_at.size(); ++i) is_fixed[fixed_at[i]] = true;
    std::size_t next_rest = fixed_at.size();
    std::size_t next_fixed = 0;
    for (std::size_t f = 0; f < total; ++f)
        order[f] = is_fixed[f] ? next_fixed++ : next_rest++;
    return permute_factors(tensor(fixed, rest), order);
}

// Ray equality: |<a|b>| >= (1 - tol) * |a| * |b|. Both vectors must be
// nonzero; a global phase never matters.
inline bool proportional(const Ket& a, const Ket& b, double tol = tol_proportional) {
    if (a.size() != b.size())
        throw ShapeError("proportional: dimension mismatch");
    double na = a.norm(), nb = b.norm();
    if (na <= tol_zero || nb <= tol_zero)
        throw ZeroVectorError("proportional is undefined for zero vectors");
    return std::abs(inner(a, b)) >= (1.0 - tol) * na * nb;
}

// ---------------------------------------------------------------------------
// Standard gates.

namespace gates {

inline Operator identity(std::size_t dim) {
    std::vector<Complex> e(dim * dim, Complex(0, 0));
    for (std::size_t i = 0; i < dim; ++i) e[i * dim + i] = Complex(1, 0);
    return Operator(dim, std::move(e));
}

inline Operator hadamard() {
    const double s = 1.0 / std::sqrt(2.0);
    return Operator(2, {Complex(s, 0), Complex(s, 0), Complex(s, 0), Complex(-s, 0)});
}

// Control on the first factor of the pair.
inline Operator cnot() {
    std::vector<Complex> e(16, Complex(0, 0));
    e[0 * 4 + 0] = Complex(1, 0);
    e[1 * 4 + 1] = Complex(1, 0);
    e[2 * 4 + 3] = Complex(1, 0);
    e[3 * 4 + 2] = Complex(1, 0);
    return Operator(4, std::move(e));
}

inline Operator pauli_x() {
    return Operator(2, {Complex(0, 0), Complex(1, 0), Complex(1, 0), Complex(0, 0)});
}

inline Operator pauli_z() {
    return Operator(2, {Complex(1, 0), Complex(0, 0), Complex(0, 0), Complex(-1, 0)});
}

} // namespace gates

} // namespace qml
