// Copyright 2026 The metalic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/// Truncated bivariate Taylor jets.
///
/// A jet of degree D stores the Taylor coefficients c(i,j) = (1/(i! j!)) d^{i+j}u / dz1^i dz2^j
/// for all i + j <= D at a fixed expansion point. Coefficients are laid out by total degree and,
/// within a degree, by descending power of z1:
///
///     (0,0) (1,0) (0,1) (2,0) (1,1) (0,2) (3,0) (2,1) (1,2) (0,3)
///
/// Because the coefficients are factorial-normalised, multiplication is the plain Cauchy product
/// truncated at degree D, and composition with a univariate function f is the truncated series
/// f(c0) + f'(c0) d + f''(c0)/2 d^2 + f'''(c0)/6 d^3 with d the jet minus its constant part.

#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace metalic {

constexpr int kMaxJetDegree = 3;

/// Number of coefficients of a degree-`degree` bivariate jet.
constexpr int jet_size(int degree) noexcept { return (degree + 1) * (degree + 2) / 2; }

/// Position of multi-index (i, j) in the coefficient layout.
constexpr int jet_index(int i, int j) noexcept {
    const int d = i + j;
    return d * (d + 1) / 2 + j;
}

struct MultiIndex {
    int i = 0;
    int j = 0;
    constexpr int order() const noexcept { return i + j; }
    friend constexpr bool operator==(MultiIndex, MultiIndex) = default;
};

/// Inverse of jet_index.
constexpr MultiIndex jet_multi_index(int k) noexcept {
    int d = 0;
    while (jet_size(d) <= k) ++d;
    const int j = k - d * (d + 1) / 2;
    return {d - j, j};
}

constexpr double factorial(int n) noexcept {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

/// i! * j! for the multi-index stored at position k: converts a Taylor coefficient to a partial.
constexpr double jet_factorial_weight(int k) noexcept {
    const MultiIndex m = jet_multi_index(k);
    return factorial(m.i) * factorial(m.j);
}

/// One contribution a[lhs] * b[rhs] -> out[result] of a truncated product.
struct ProductTerm {
    int lhs;
    int rhs;
    int result;
};

/// All terms of the degree-truncated Cauchy product. When `skip_constant` is set, terms that
/// involve a constant coefficient on either side are omitted (used for powers of a jet whose
/// constant part is zero).
inline std::vector<ProductTerm> make_product_table(int degree, bool skip_constant) {
    std::vector<ProductTerm> table;
    const int n = jet_size(degree);
    for (int a = 0; a < n; ++a) {
        const MultiIndex ma = jet_multi_index(a);
        for (int b = 0; b < n; ++b) {
            const MultiIndex mb = jet_multi_index(b);
            if (ma.order() + mb.order() > degree) continue;
            if (skip_constant && (a == 0 || b == 0)) continue;
            table.push_back({a, b, jet_index(ma.i + mb.i, ma.j + mb.j)});
        }
    }
    return table;
}

/// Cached product tables for degrees 0..kMaxJetDegree.
inline const std::vector<ProductTerm>& product_table(int degree, bool skip_constant = false) {
    static const auto tables = [] {
        std::array<std::array<std::vector<ProductTerm>, 2>, kMaxJetDegree + 1> t;
        for (int d = 0; d <= kMaxJetDegree; ++d) {
            t[d][0] = make_product_table(d, false);
            t[d][1] = make_product_table(d, true);
        }
        return t;
    }();
    assert(degree >= 0 && degree <= kMaxJetDegree);
    return tables[degree][skip_constant ? 1 : 0];
}

/// Derivatives f, f', f'', f''' of a univariate function at one point.
using Derivatives4 = std::array<double, 4>;

/// tanh and its first three derivatives, from tanh' = 1 - tanh^2.
inline Derivatives4 tanh_derivatives(double z) noexcept {
    const double t = std::tanh(z);
    const double t1 = 1.0 - t * t;
    const double t2 = -2.0 * t * t1;
    const double t3 = -2.0 * t1 * t1 - 2.0 * t * t2;
    return {t, t1, t2, t3};
}

enum class Seed { first, second, constant };

template <int Degree = kMaxJetDegree>
class TaylorJet {
    static_assert(Degree >= 0 && Degree <= kMaxJetDegree);

public:
    static constexpr int degree = Degree;
    static constexpr int size = jet_size(Degree);
    using Point = std::array<double, 2>;

    TaylorJet() = default;

    /// Constant jet with value `value` expanded at `point`.
    TaylorJet(double value, Point point) : point_(point) { coeffs_[0] = value; }

    /// Identity jet of one coordinate, or a constant jet with the given value.
    static TaylorJet seed(Point point, Seed which, double constant_value = 0.0) {
        TaylorJet jet(0.0, point);
        switch (which) {
        case Seed::first:
            jet.coeffs_[0] = point[0];
            if constexpr (Degree >= 1) jet.coeffs_[jet_index(1, 0)] = 1.0;
            break;
        case Seed::second:
            jet.coeffs_[0] = point[1];
            if constexpr (Degree >= 1) jet.coeffs_[jet_index(0, 1)] = 1.0;
            break;
        case Seed::constant:
            jet.coeffs_[0] = constant_value;
            break;
        }
        return jet;
    }

    /// Build a jet from partial derivatives given in the coefficient layout.
    static TaylorJet from_partials(Point point, std::span<const double> partials) {
        if (partials.size() != static_cast<std::size_t>(size)) {
            throw std::invalid_argument("TaylorJet::from_partials: expected " + std::to_string(size) +
                                        " partials");
        }
        TaylorJet jet(0.0, point);
        for (int k = 0; k < size; ++k) jet.coeffs_[k] = partials[k] / jet_factorial_weight(k);
        return jet;
    }

    const Point& point() const noexcept { return point_; }
    const std::array<double, size>& coeffs() const noexcept { return coeffs_; }
    double coeff(int i, int j) const { return coeffs_[checked_index(i, j)]; }
    double& coeff(int i, int j) { return coeffs_[checked_index(i, j)]; }
    double value() const noexcept { return coeffs_[0]; }

    /// Partial derivative d^{i+j} / dz1^i dz2^j at the expansion point.
    double extract(int i, int j) const {
        return coeffs_[checked_index(i, j)] * factorial(i) * factorial(j);
    }

    TaylorJet& operator+=(const TaylorJet& o) {
        require_same_point(o);
        for (int k = 0; k < size; ++k) coeffs_[k] += o.coeffs_[k];
        return *this;
    }
    TaylorJet& operator-=(const TaylorJet& o) {
        require_same_point(o);
        for (int k = 0; k < size; ++k) coeffs_[k] -= o.coeffs_[k];
        return *this;
    }
    TaylorJet& operator*=(double s) noexcept {
        for (double& c : coeffs_) c *= s;
        return *this;
    }
    TaylorJet& operator+=(double s) noexcept {
        coeffs_[0] += s;
        return *this;
    }

    friend TaylorJet operator+(TaylorJet a, const TaylorJet& b) { return a += b; }
    friend TaylorJet operator-(TaylorJet a, const TaylorJet& b) { return a -= b; }
    friend TaylorJet operator*(TaylorJet a, double s) noexcept { return a *= s; }
    friend TaylorJet operator*(double s, TaylorJet a) noexcept { return a *= s; }
    friend TaylorJet operator+(TaylorJet a, double s) noexcept { return a += s; }
    friend TaylorJet operator+(double s, TaylorJet a) noexcept { return a += s; }
    friend TaylorJet operator-(TaylorJet a, double s) noexcept { return a += -s; }
    friend TaylorJet operator-(TaylorJet a) noexcept { return a *= -1.0; }

    friend TaylorJet operator*(const TaylorJet& a, const TaylorJet& b) {
        a.require_same_point(b);
        TaylorJet out(0.0, a.point_);
        for (const ProductTerm& t : product_table(Degree)) {
            out.coeffs_[t.result] += a.coeffs_[t.lhs] * b.coeffs_[t.rhs];
        }
        return out;
    }

    /// f(a) truncated to Degree, given f and its derivatives at a's value.
    friend TaylorJet compose(const TaylorJet& a, const Derivatives4& f) {
        TaylorJet delta = a;
        delta.coeffs_[0] = 0.0;
        TaylorJet out(f[0], a.point_);
        TaylorJet power = delta;
        for (int k = 1; k <= Degree; ++k) {
            const double scale = f[k] / factorial(k);
            for (int c = 0; c < size; ++c) out.coeffs_[c] += scale * power.coeffs_[c];
            if (k < Degree) power = power * delta;
        }
        return out;
    }

    friend TaylorJet tanh(const TaylorJet& a) { return compose(a, tanh_derivatives(a.value())); }
    friend TaylorJet sin(const TaylorJet& a) {
        const double s = std::sin(a.value()), c = std::cos(a.value());
        return compose(a, {s, c, -s, -c});
    }
    friend TaylorJet cos(const TaylorJet& a) {
        const double s = std::sin(a.value()), c = std::cos(a.value());
        return compose(a, {c, -s, -c, s});
    }
    friend TaylorJet exp(const TaylorJet& a) {
        const double e = std::exp(a.value());
        return compose(a, {e, e, e, e});
    }
    /// 1 / a; the value must be non-zero.
    friend TaylorJet reciprocal(const TaylorJet& a) {
        const double r = 1.0 / a.value();
        return compose(a, {r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r});
    }

    friend bool operator==(const TaylorJet&, const TaylorJet&) = default;

private:
    static int checked_index(int i, int j) {
        if (i < 0 || j < 0 || i + j > Degree) {
            throw std::out_of_range("TaylorJet: multi-index (" + std::to_string(i) + "," +
                                    std::to_string(j) + ") exceeds degree " + std::to_string(Degree));
        }
        return jet_index(i, j);
    }

    void require_same_point(const TaylorJet& o) const {
        if (point_ != o.point_) {
            throw std::invalid_argument("TaylorJet: operands expanded at different points");
        }
    }

    std::array<double, size> coeffs_{};
    Point point_{0.0, 0.0};
};

using Jet = TaylorJet<kMaxJetDegree>;

}  // namespace metalic
