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

#include "metalic/jet.hpp"

#include "fd_oracle.hpp"

#include <gtest/gtest.h>

#include <random>

namespace metalic {
namespace {

using testing::close_relative;
using testing::fd_partial;

constexpr MultiIndex kAllIndices[] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}, {3, 0}, {2, 1}, {1, 2}, {0, 3}};

// The polynomial a jet represents around its expansion point.
double eval_polynomial(const Jet& jet, double z1, double z2) {
    const double d1 = z1 - jet.point()[0], d2 = z2 - jet.point()[1];
    double acc = 0.0;
    for (const MultiIndex m : kAllIndices) acc += jet.coeff(m.i, m.j) * std::pow(d1, m.i) * std::pow(d2, m.j);
    return acc;
}

Jet random_jet(std::mt19937_64& rng, Jet::Point point) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Jet jet(0.0, point);
    for (const MultiIndex m : kAllIndices) jet.coeff(m.i, m.j) = u(rng);
    return jet;
}

TEST(JetLayout, IndexOrderIsDocumented) {
    for (int k = 0; k < 10; ++k) {
        EXPECT_EQ(jet_multi_index(k), kAllIndices[k]);
        EXPECT_EQ(jet_index(kAllIndices[k].i, kAllIndices[k].j), k);
    }
    EXPECT_EQ(jet_size(3), 10);
    EXPECT_EQ(jet_size(0), 1);
}

TEST(JetSeed, FirstVariable) {
    const Jet j = Jet::seed({0.3, 0.7}, Seed::first);
    EXPECT_EQ(j.coeff(0, 0), 0.3);
    EXPECT_EQ(j.coeff(1, 0), 1.0);
    for (int k = 2; k < 10; ++k) EXPECT_EQ(j.coeffs()[k], 0.0);
}

TEST(JetSeed, Constant) {
    const Jet j = Jet::seed({0.3, 0.7}, Seed::constant, 5.0);
    EXPECT_EQ(j.coeff(0, 0), 5.0);
    for (int k = 1; k < 10; ++k) EXPECT_EQ(j.coeffs()[k], 0.0);
}

TEST(JetSeed, SecondVariableAtOrigin) {
    const Jet j = Jet::seed({0.0, 0.0}, Seed::second);
    EXPECT_EQ(j.coeff(0, 1), 1.0);
    for (int k = 0; k < 10; ++k) {
        if (k != jet_index(0, 1)) {
            EXPECT_EQ(j.coeffs()[k], 0.0);
        }
    }
}

TEST(JetArith, SquareOfVariable) {
    const Jet z = Jet::seed({2.0, 0.0}, Seed::first);
    const Jet sq = z * z;
    EXPECT_EQ(sq.extract(0, 0), 4.0);
    EXPECT_EQ(sq.extract(1, 0), 4.0);
    EXPECT_EQ(sq.extract(2, 0), 2.0);
    EXPECT_EQ(sq.extract(3, 0), 0.0);
}

TEST(JetArith, AdditiveInverse) {
    std::mt19937_64 rng(1);
    const Jet a = random_jet(rng, {0.1, 0.2});
    const Jet zero = a + (-a);
    for (double c : zero.coeffs()) EXPECT_EQ(c, 0.0);
}

TEST(JetArith, MismatchedPointsRejected) {
    const Jet a = Jet::seed({0.0, 0.0}, Seed::first);
    const Jet b = Jet::seed({0.0, 1.0}, Seed::first);
    EXPECT_THROW(a + b, std::invalid_argument);
    EXPECT_THROW(a * b, std::invalid_argument);
}

TEST(JetArith, ProductMatchesFiniteDifferences) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Jet::Point p{0.4, -0.3};
        const Jet a = random_jet(rng, p), b = random_jet(rng, p);
        const Jet prod = a * b;
        auto f = [&](double z1, double z2) { return eval_polynomial(a, z1, z2) * eval_polynomial(b, z1, z2); };
        for (const MultiIndex m : kAllIndices) {
            const double fd = fd_partial(f, p[0], p[1], m.i, m.j, 1e-3);
            EXPECT_TRUE(close_relative(prod.extract(m.i, m.j), fd, 1e-5))
                << "trial " << trial << " (" << m.i << "," << m.j << "): " << prod.extract(m.i, m.j) << " vs " << fd;
        }
    }
}

TEST(JetArith, TruncationClosureOnMonomials) {
    const Jet::Point p{0.25, 0.5};
    for (const MultiIndex ma : kAllIndices) {
        for (const MultiIndex mb : kAllIndices) {
            Jet a(0.0, p), b(0.0, p);
            a.coeff(ma.i, ma.j) = 1.0;
            b.coeff(mb.i, mb.j) = 1.0;
            const Jet prod = a * b;
            const int ri = ma.i + mb.i, rj = ma.j + mb.j;
            for (const MultiIndex m : kAllIndices) {
                const double expected = (ri + rj <= 3 && m.i == ri && m.j == rj) ? 1.0 : 0.0;
                EXPECT_EQ(prod.coeff(m.i, m.j), expected);
            }
        }
    }
}

TEST(JetTanh, SeededAtZero) {
    const Jet t = tanh(Jet::seed({0.0, 0.0}, Seed::first));
    EXPECT_EQ(t.extract(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(t.extract(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(t.extract(2, 0), 0.0);
    EXPECT_DOUBLE_EQ(t.extract(3, 0), -2.0);
}

TEST(JetTanh, ConstantJet) {
    const Jet t = tanh(Jet(0.8, {1.0, 2.0}));
    EXPECT_EQ(t.value(), std::tanh(0.8));
    for (int k = 1; k < 10; ++k) EXPECT_EQ(t.coeffs()[k], 0.0);
}

TEST(JetTanh, RandomJetMatchesFiniteDifferences) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Jet::Point p{-0.2, 0.6};
        const Jet a = random_jet(rng, p);
        const Jet t = tanh(a);
        auto f = [&](double z1, double z2) { return std::tanh(eval_polynomial(a, z1, z2)); };
        for (const MultiIndex m : kAllIndices) {
            const double fd = fd_partial(f, p[0], p[1], m.i, m.j);
            EXPECT_TRUE(close_relative(t.extract(m.i, m.j), fd, 1e-5))
                << "(" << m.i << "," << m.j << "): " << t.extract(m.i, m.j) << " vs " << fd;
        }
    }
}

TEST(JetCompose, ExpSinReciprocalMatchFiniteDifferences) {
    std::mt19937_64 rng(3);
    const Jet::Point p{0.3, 0.1};
    Jet a = random_jet(rng, p);
    a.coeff(0, 0) = 1.5;
    const Jet e = exp(a), s = sin(a), r = reciprocal(a);
    auto fe = [&](double x, double y) { return std::exp(eval_polynomial(a, x, y)); };
    auto fs = [&](double x, double y) { return std::sin(eval_polynomial(a, x, y)); };
    auto fr = [&](double x, double y) { return 1.0 / eval_polynomial(a, x, y); };
    for (const MultiIndex m : kAllIndices) {
        EXPECT_TRUE(close_relative(e.extract(m.i, m.j), fd_partial(fe, p[0], p[1], m.i, m.j), 1e-5));
        EXPECT_TRUE(close_relative(s.extract(m.i, m.j), fd_partial(fs, p[0], p[1], m.i, m.j), 1e-5));
        EXPECT_TRUE(close_relative(r.extract(m.i, m.j), fd_partial(fr, p[0], p[1], m.i, m.j), 1e-5));
    }
}

TEST(JetExtract, FactorialScaling) {
    Jet j(3.0, {0.0, 0.0});
    j.coeff(2, 0) = 0.5;
    j.coeff(1, 2) = 0.25;
    EXPECT_EQ(j.extract(2, 0), 1.0);
    EXPECT_EQ(j.extract(0, 0), 3.0);
    EXPECT_EQ(j.extract(1, 2), 0.5);
}

TEST(JetExtract, OutOfRangeRejected) {
    const Jet j(1.0, {0.0, 0.0});
    EXPECT_THROW(j.extract(2, 2), std::out_of_range);
    EXPECT_THROW(j.extract(-1, 0), std::out_of_range);
    EXPECT_NO_THROW(j.extract(0, 3));
}

TEST(JetArith, Deterministic) {
    std::mt19937_64 rng(5);
    const Jet::Point p{0.0, 0.0};
    const Jet a = random_jet(rng, p), b = random_jet(rng, p);
    EXPECT_EQ(tanh(a * b + a), tanh(a * b + a));
}

TEST(JetLowDegree, TruncatesAtItsDegree) {
    using Jet1 = TaylorJet<1>;
    const Jet1 z = Jet1::seed({2.0, 0.0}, Seed::first);
    const Jet1 sq = z * z;
    EXPECT_EQ(sq.extract(0, 0), 4.0);
    EXPECT_EQ(sq.extract(1, 0), 4.0);
    EXPECT_THROW(sq.extract(2, 0), std::out_of_range);
}

}  // namespace
}  // namespace metalic
