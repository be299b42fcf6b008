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

/// Loss-side differentiation with respect to the Taylor coefficients of a single point.
///
/// Residuals, fluxes and interface quantities are small expressions in the partials of u at one
/// point. `Lin` carries such a value together with its gradient with respect to that point's
/// (at most 10) jet coefficients, which is exactly the adjoint the batched tape consumes.

#include "metalic/jet.hpp"

#include <Eigen/Core>

#include <array>
#include <stdexcept>
#include <string>

namespace metalic {

struct Lin {
    static constexpr int kSize = jet_size(kMaxJetDegree);

    double v = 0.0;
    std::array<double, kSize> d{};

    Lin() = default;
    Lin(double value) : v(value) {}  // NOLINT: constants promote implicitly

    Lin& operator+=(const Lin& o) noexcept {
        v += o.v;
        for (int k = 0; k < kSize; ++k) d[k] += o.d[k];
        return *this;
    }
    Lin& operator-=(const Lin& o) noexcept {
        v -= o.v;
        for (int k = 0; k < kSize; ++k) d[k] -= o.d[k];
        return *this;
    }
    Lin& operator*=(double s) noexcept {
        v *= s;
        for (double& x : d) x *= s;
        return *this;
    }

    friend Lin operator+(Lin a, const Lin& b) noexcept { return a += b; }
    friend Lin operator-(Lin a, const Lin& b) noexcept { return a -= b; }
    friend Lin operator-(Lin a) noexcept { return a *= -1.0; }
    friend Lin operator*(Lin a, double s) noexcept { return a *= s; }
    friend Lin operator*(double s, Lin a) noexcept { return a *= s; }
    friend Lin operator*(const Lin& a, const Lin& b) noexcept {
        Lin r;
        r.v = a.v * b.v;
        for (int k = 0; k < kSize; ++k) r.d[k] = a.d[k] * b.v + a.v * b.d[k];
        return r;
    }
};

/// The jet of one point inside a batch (rows = points, columns = Taylor coefficients).
class JetRow {
public:
    JetRow(const Eigen::MatrixXd& jets, Eigen::Index row) : jets_(&jets), row_(row) {}

    int size() const noexcept { return static_cast<int>(jets_->cols()); }

    /// d^{i+j} u / dz1^i dz2^j as a linearized value.
    Lin partial(int i, int j) const {
        const int k = jet_index(i, j);
        if (i < 0 || j < 0 || k >= size()) {
            throw std::out_of_range("JetRow: partial (" + std::to_string(i) + "," + std::to_string(j) +
                                    ") exceeds the evaluated jet degree");
        }
        const double w = factorial(i) * factorial(j);
        Lin r((*jets_)(row_, k) * w);
        r.d[k] = w;
        return r;
    }

    /// Accumulate scale * dq/dcoeffs into the adjoint row of this point.
    void scatter(const Lin& q, double scale, Eigen::MatrixXd& adjoint) const {
        for (int k = 0; k < size(); ++k) adjoint(row_, k) += scale * q.d[k];
    }

private:
    const Eigen::MatrixXd* jets_;
    Eigen::Index row_;
};

}  // namespace metalic
