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

#include "metalic/gp.hpp"
#include "metalic/rng.hpp"

#include <Eigen/LU>
#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

namespace metalic {
namespace {

Action mask_of(std::initializer_list<int> on) {
    Action a;
    for (int i : on) a.mask[i] = true;
    return a;
}

RewardDataset random_dataset(std::size_t n, int dim, std::uint64_t seed, double ctx_hi = 1.0) {
    auto rng = make_stream(seed, {41});
    RewardDataset d(dim);
    std::vector<double> c(static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : c) v = uniform(rng, 0.0, ctx_hi);
        d.add(c, action_from_index(static_cast<int>(uniform_index(rng, kNumActions))), standard_normal(rng));
    }
    return d;
}

KernelParams params(double t1, double t2, double noise) {
    KernelParams p;
    p.tau1 = t1;
    p.tau2 = t2;
    p.noise_var = noise;
    return p;
}

TEST(Kernel, IdenticalInputsGiveExpTau2) {
    const std::vector<double> c{0.3};
    const Action a = mask_of({0, 4});
    EXPECT_DOUBLE_EQ(kernel_eval(params(25, 2, 0), c, a, c, a), std::exp(2.0));
}

TEST(Kernel, SixOfNineAgreement) {
    const std::vector<double> c{0.3};
    const Action a = mask_of({0, 1, 2});
    const Action b = mask_of({});
    EXPECT_EQ(mask_agreement(action_index(a), action_index(b)), 6);
    EXPECT_NEAR(kernel_eval(params(25, 1, 0), c, a, c, b), 1.9477340410546757, 1e-14);
}

TEST(Kernel, UnitDistanceWithZeroSharpness) {
    KernelParams p = params(1, 1, 0);
    p.tau2 = 0.0;
    const std::vector<double> c{0.0, 0.0}, d{0.6, 0.8};
    const Action a = mask_of({3});
    EXPECT_NEAR(kernel_eval(p, c, a, d, a), 0.36787944117144233, 1e-15);
}

TEST(Kernel, AgreementIsSymmetricAndBounded) {
    for (int a = 0; a < kNumActions; a += 7) {
        for (int b = 0; b < kNumActions; b += 11) {
            const int m = mask_agreement(a, b);
            EXPECT_EQ(m, mask_agreement(b, a));
            EXPECT_GE(m, 0);
            EXPECT_LE(m, kNumConditions);
        }
        EXPECT_EQ(mask_agreement(a, a), kNumConditions);
        EXPECT_EQ(mask_agreement(a, a ^ (kNumActions - 1)), 0);
    }
}

TEST(GpFit, EmptyDatasetIsThePrior) {
    const RewardDataset d(1);
    const GpPosterior g = gp_fit(d, params(25, 2, 0));
    const auto pr = g.predict(std::vector<double>{0.7}, mask_of({1}));
    EXPECT_EQ(pr.mean, 0.0);
    EXPECT_DOUBLE_EQ(pr.variance, std::exp(2.0));
    for (const auto& q : g.predict_all(std::vector<double>{0.1})) {
        EXPECT_EQ(q.mean, 0.0);
        EXPECT_DOUBLE_EQ(q.variance, std::exp(2.0));
    }
    EXPECT_EQ(g.log_marginal_likelihood(), 0.0);
}

TEST(GpFit, SingleNoiselessRowInterpolates) {
    RewardDataset d(1);
    const std::vector<double> c{0.4};
    const Action a = mask_of({2, 5});
    d.add(c, a, 2.0);
    // tau2 so small that the prior variance rounds to exactly 1.
    const GpPosterior g = gp_fit(d, params(25, 1e-300, 0));
    const auto pr = g.predict(c, a);
    EXPECT_DOUBLE_EQ(pr.mean, 2.0);
    EXPECT_NEAR(pr.variance, 0.0, 1e-15);
}

TEST(GpFit, HandTwoByTwoExample) {
    // Equilateral triangle of unit side with tau1 = ln 2: every off-diagonal kernel value is 1/2.
    KernelParams p = params(std::log(2.0), 1e-300, 0.0);
    RewardDataset d(2);
    const Action a = mask_of({0});
    d.add(std::vector<double>{0.0, 0.0}, a, 1.0);
    d.add(std::vector<double>{1.0, 0.0}, a, 0.0);
    const std::vector<double> x{0.5, std::sqrt(3.0) / 2.0};
    EXPECT_NEAR(kernel_eval(p, d.context(0), a, d.context(1), a), 0.5, 1e-15);
    EXPECT_NEAR(kernel_eval(p, d.context(0), a, x, a), 0.5, 1e-15);
    EXPECT_NEAR(kernel_eval(p, d.context(1), a, x, a), 0.5, 1e-15);
    const GpPosterior g = gp_fit(d, p);
    EXPECT_EQ(g.jitter_used(), 0.0);
    const auto pr = g.predict(x, a);
    // alpha = K^-1 y = [4/3, -2/3]; k* . alpha = 1/3; var = 1 - k*' K^-1 k* = 2/3.
    EXPECT_NEAR(pr.mean, 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(pr.variance, 2.0 / 3.0, 1e-12);
}

TEST(GpFit, FarContextDisjointMaskRevertsToPrior) {
    RewardDataset d(1);
    d.add(std::vector<double>{0.0}, mask_of({0, 1, 2}), 3.0);
    d.add(std::vector<double>{0.1}, mask_of({0, 1}), -1.0);
    const KernelParams p = params(25, 1e-3, 1e-2);
    const GpPosterior g = gp_fit(d, p);
    const Action far_mask = action_from_index(action_index(mask_of({0, 1, 2})) ^ (kNumActions - 1));
    const auto pr = g.predict(std::vector<double>{10.0}, far_mask);
    EXPECT_NEAR(pr.mean, 0.0, 1e-12);
    EXPECT_NEAR(pr.variance, std::exp(1e-3) + 1e-2, 1e-12);
}

TEST(GpPredict, MatchesDenseSolveOracle) {
    const RewardDataset d = random_dataset(20, 2, 5);
    const KernelParams p = params(3.0, 1.5, 1e-2);
    const auto n = static_cast<Eigen::Index>(d.size());
    Eigen::MatrixXd K(n, n);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y[i] = d.reward(i);
        for (Eigen::Index j = 0; j < n; ++j) {
            K(i, j) = kernel_eval(p, d.context(i), action_from_index(d.action(i)), d.context(j),
                                  action_from_index(d.action(j)));
        }
    }
    K.diagonal().array() += p.noise_var;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    const GpPosterior g = gp_fit(d, p);
    auto rng = make_stream(6, {});
    for (int t = 0; t < 25; ++t) {
        const std::vector<double> x{uniform(rng, 0, 1), uniform(rng, 0, 1)};
        const Action a = action_from_index(static_cast<int>(uniform_index(rng, kNumActions)));
        Eigen::VectorXd ks(n);
        for (Eigen::Index i = 0; i < n; ++i) ks[i] = kernel_eval(p, x, a, d.context(i), action_from_index(d.action(i)));
        const double mean = ks.dot(lu.solve(y));
        const double var = kernel_eval(p, x, a, x, a) - ks.dot(lu.solve(ks)) + p.noise_var;
        const auto pr = g.predict(x, a);
        EXPECT_NEAR(pr.mean, mean, 1e-8);
        EXPECT_NEAR(pr.variance, var, 1e-8);
        const auto all = g.predict_all(x);
        EXPECT_NEAR(all[action_index(a)].mean, pr.mean, 1e-12);
        EXPECT_NEAR(all[action_index(a)].variance, pr.variance, 1e-12);
    }
    // Log marginal likelihood against the LU determinant.
    const double lml = -0.5 * y.dot(lu.solve(y)) - 0.5 * std::log(lu.determinant()) -
                       0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    EXPECT_NEAR(g.log_marginal_likelihood(), lml, 1e-9);
}

TEST(GpProperties, FiftyPointGramsFactorWithoutEscalation) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const RewardDataset d = random_dataset(50, 1, 100 + s);
        const GpPosterior g = gp_fit(d, params(25, 2, 0));
        EXPECT_LE(g.jitter_used(), 1e-8) << "seed " << s;
    }
}

TEST(GpProperties, PermutationInvariance) {
    const RewardDataset d = random_dataset(30, 1, 7);
    std::vector<std::size_t> perm(d.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::swap(perm[3], perm[17]);
    RewardDataset e(1);
    for (std::size_t i : perm) e.add(d.context(i), action_from_index(d.action(i)), d.reward(i));
    const KernelParams p{};
    const GpPosterior g = gp_fit(d, p), h = gp_fit(e, p);
    EXPECT_NEAR(g.log_marginal_likelihood(), h.log_marginal_likelihood(), 1e-9);
    auto rng = make_stream(8, {});
    for (int t = 0; t < 20; ++t) {
        const std::vector<double> x{uniform(rng, 0, 1)};
        const auto a = g.predict_all(x), b = h.predict_all(x);
        for (int k = 0; k < kNumActions; ++k) {
            ASSERT_NEAR(a[k].mean, b[k].mean, 1e-9);
            ASSERT_NEAR(a[k].variance, b[k].variance, 1e-9);
        }
    }
}

TEST(GpProperties, NoiselessMeanInterpolates) {
    const RewardDataset d = random_dataset(40, 1, 9);
    const GpPosterior g = gp_fit(d, params(25, 2, 0));
    ASSERT_LE(g.jitter_used(), 1e-8);
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_NEAR(g.predict(d.context(i), action_from_index(d.action(i))).mean, d.reward(i), 1e-8);
    }
}

TEST(GpProperties, VarianceNonNegative) {
    for (double noise : {0.0, 1e-2}) {
        const RewardDataset d = random_dataset(60, 2, 10);
        const GpPosterior g = gp_fit(d, params(25, 2, noise));
        auto rng = make_stream(11, {});
        for (int t = 0; t < 20; ++t) {
            const std::vector<double> x{uniform(rng, 0, 1), uniform(rng, 0, 1)};
            for (const auto& q : g.predict_all(x)) ASSERT_GE(q.variance, 0.0);
        }
        for (std::size_t i = 0; i < d.size(); ++i) {
            ASSERT_GE(g.predict(d.context(i), action_from_index(d.action(i))).variance, 0.0);
        }
    }
}

TEST(GpFit, ConflictingDuplicatesEscalateJitter) {
    RewardDataset d(1);
    const std::vector<double> c{0.5};
    d.add(c, mask_of({1}), 1.0);
    d.add(c, mask_of({1}), -1.0);
    const GpPosterior g = gp_fit(d, params(25, 2, 0));
    EXPECT_GT(g.jitter_used(), 0.0);
    EXPECT_LE(g.jitter_used(), kMaxJitter);
    EXPECT_NEAR(g.predict(c, mask_of({1})).mean, 0.0, 1e-6);
}

TEST(GpFit, Preconditions) {
    EXPECT_THROW(params(0, 1, 0).validate(), ConfigError);
    EXPECT_THROW(params(1, -1, 0).validate(), ConfigError);
    EXPECT_THROW(params(1, 1, -1e-3).validate(), ConfigError);
    RewardDataset d(2);
    EXPECT_THROW(d.add(std::vector<double>{1.0}, Action{}, 0.0), std::invalid_argument);
    EXPECT_THROW(d.add(std::vector<double>{1.0, 2.0}, Action{}, std::nan("")), NumericalError);
    EXPECT_THROW(RewardDataset(0), std::invalid_argument);
    const GpPosterior unfitted;
    EXPECT_FALSE(unfitted.fitted());
    EXPECT_THROW(unfitted.predict(std::vector<double>{0.0, 0.0}, Action{}), std::logic_error);
}

/// Rewards drawn from the GP prior with the given hyperparameters plus observation noise. Masks
/// come from a 32-element subset so that each recurs; with all-distinct masks the noise level is
/// not identifiable from 200 rows.
RewardDataset sample_from_gp(std::size_t n, const KernelParams& truth, std::uint64_t seed) {
    auto rng = make_stream(seed, {77});
    RewardDataset d(1);
    for (std::size_t i = 0; i < n; ++i) {
        d.add(std::vector<double>{uniform(rng, 0.0, 4.0)},
              action_from_index(static_cast<int>(uniform_index(rng, 32) * (kNumActions / 32))), 0.0);
    }
    const auto m = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd K(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            K(i, j) = kernel_eval(truth, d.context(i), action_from_index(d.action(i)), d.context(j),
                                  action_from_index(d.action(j)));
        }
    }
    K.diagonal().array() += 1e-10;
    const Eigen::MatrixXd L = K.llt().matrixL();
    Eigen::VectorXd z(m);
    for (auto& v : z) v = standard_normal(rng);
    const Eigen::VectorXd f = L * z;
    RewardDataset out(1);
    for (Eigen::Index i = 0; i < m; ++i) {
        out.add(d.context(i), action_from_index(d.action(i)), f[i] + std::sqrt(truth.noise_var) * standard_normal(rng));
    }
    return out;
}

TEST(OptimizeHypers, FewRowsKeepDefaults) {
    const RewardDataset d = random_dataset(4, 1, 12);
    const KernelParams p = optimize_hypers(d);
    const KernelParams def{};
    EXPECT_EQ(p.tau1, def.tau1);
    EXPECT_EQ(p.tau2, def.tau2);
    EXPECT_EQ(p.noise_var, def.noise_var);
}

TEST(OptimizeHypers, DominatesDefaultsAndIsDeterministic) {
    const RewardDataset d = sample_from_gp(60, params(1, 1, 1e-2), 13);
    const KernelParams p = optimize_hypers(d);
    EXPECT_GE(gp_fit(d, p).log_marginal_likelihood(), gp_fit(d, KernelParams{}).log_marginal_likelihood());
    const KernelParams q = optimize_hypers(d);
    EXPECT_EQ(p.tau1, q.tau1);
    EXPECT_EQ(p.tau2, q.tau2);
    EXPECT_EQ(p.noise_var, q.noise_var);
}

TEST(OptimizeHypers, ConflictingDuplicatesForceNoise) {
    RewardDataset d(1);
    for (int i = 0; i < 6; ++i) {
        d.add(std::vector<double>{0.1 * i}, mask_of({i}), 1.0);
        d.add(std::vector<double>{0.1 * i}, mask_of({i}), -1.0);
    }
    const KernelParams p = optimize_hypers(d);
    // The conflicts alone have sample variance 1 about their midpoint.
    EXPECT_GT(p.noise_var, 0.1);
}

TEST(OptimizeHypers, RecoversSyntheticTruthWithinOneGridCell) {
    const KernelParams truth = params(1, 1, 1e-2);
    const RewardDataset d = sample_from_gp(200, truth, 14);
    const HyperSearch s{};
    const KernelParams p = optimize_hypers(d, s);
    EXPECT_LE(std::abs(std::log10(p.tau1) - std::log10(truth.tau1)), s.step);
    EXPECT_LE(std::abs(std::log10(p.tau2) - std::log10(truth.tau2)), s.step);
    EXPECT_LE(std::abs(std::log10(p.noise_var) - std::log10(truth.noise_var)), s.step);
}

TEST(DatasetCsv, RoundTripsExactly) {
    const RewardDataset d = random_dataset(15, 2, 15);
    std::stringstream ss;
    write_dataset_csv(d, ss);
    const std::string text = ss.str();
    EXPECT_NE(text.find("ctx0,ctx1,m0,m1,m2,m3,m4,m5,m6,m7,m8,reward"), std::string::npos);
    const RewardDataset e = read_dataset_csv(ss);
    ASSERT_EQ(e.size(), d.size());
    ASSERT_EQ(e.context_dim(), 2);
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_EQ(e.action(i), d.action(i));
        EXPECT_EQ(e.reward(i), d.reward(i));
        EXPECT_EQ(e.context(i)[0], d.context(i)[0]);
        EXPECT_EQ(e.context(i)[1], d.context(i)[1]);
    }
}

TEST(DatasetCsv, RejectsMissingContext) {
    std::stringstream ss("schema_version,1\nm0,reward\n1,2\n");
    EXPECT_THROW(read_dataset_csv(ss), SchemaError);
}

}  // namespace
}  // namespace metalic
