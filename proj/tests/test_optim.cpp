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

#include "metalic/optim.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace metalic {
namespace {

using Eigen::VectorXd;

double rosenbrock(const VectorXd& x, VectorXd& g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
}

struct Quadratic {
    Eigen::MatrixXd A;
    VectorXd b;
    double operator()(const VectorXd& x, VectorXd& g) const {
        g = A * x - b;
        return 0.5 * x.dot(A * x) - b.dot(x);
    }
};

Quadratic random_quadratic(int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = nd(rng);
    Quadratic q;
    q.A = M * M.transpose() + Eigen::MatrixXd::Identity(n, n);
    q.b = VectorXd::NullaryExpr(n, [&](Eigen::Index) { return nd(rng); });
    return q;
}

// Accepted losses from a trace, in order.
std::vector<double> trace_losses(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::vector<double> out;
    while (std::getline(in, line)) {
        const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
        out.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
    }
    return out;
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
    auto f = [](const VectorXd& x, VectorXd& g) {
        g[0] = 3.0;
        return 3.0 * x[0];
    };
    AdamConfig cfg;
    cfg.epochs = 1;
    const auto r = adam_run(f, VectorXd::Zero(1), cfg);
    EXPECT_NEAR(r.params[0], -1e-3 * 3.0 / (3.0 + 1e-8), 1e-15);
}

TEST(Adam, MatchesIndependentScalarRecursion) {
    auto f = [](const VectorXd& x, VectorXd& g) {
        g[0] = x[0] - 5.0;
        return 0.5 * g[0] * g[0];
    };
    AdamConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 5000;
    const auto r = adam_run(f, VectorXd::Zero(1), cfg);

    double th = 0.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 5000; ++t) {
        const double g = th - 5.0;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
        th -= 1e-2 * mh / (std::sqrt(vh) + 1e-8);
    }
    EXPECT_NEAR(r.params[0], th, 1e-9);
    EXPECT_LT(std::abs(r.params[0] - 5.0), 1e-3);
    EXPECT_NEAR(r.loss, 0.5 * (r.params[0] - 5.0) * (r.params[0] - 5.0), 1e-18);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
    auto f = [](const VectorXd&, VectorXd& g) {
        g.setZero();
        return 1.0;
    };
    VectorXd x0(3);
    x0 << 0.1, -2.0, 7.5;
    AdamConfig cfg;
    cfg.epochs = 100;
    EXPECT_EQ(adam_run(f, x0, cfg).params, x0);
}

TEST(Adam, NonFiniteLossCarriesIterationAndState) {
    auto f = [](const VectorXd& x, VectorXd& g) {
        g.setConstant(1.0);
        return x[0] < -0.0025 ? std::nan("") : x[0];
    };
    AdamConfig cfg;
    cfg.epochs = 100;
    try {
        adam_run(f, VectorXd::Zero(1), cfg);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("iteration 3"), std::string::npos) << e.what();
        ASSERT_EQ(e.state().size(), 1u);
        EXPECT_LT(e.state()[0], -0.0025);
    }
}

TEST(Adam, DivergenceGuardStops) {
    auto f = [](const VectorXd& x, VectorXd& g) {
        g[0] = -1.0;
        return 1e7 * x[0];
    };
    AdamConfig cfg;
    cfg.learning_rate = 1.0;
    cfg.epochs = 100;
    cfg.divergence_threshold = 1e6;
    const auto r = adam_run(f, VectorXd::Zero(1), cfg);
    EXPECT_EQ(r.reason, StopReason::diverged);
    EXPECT_GT(r.loss, 1e6);
}

TEST(Adam, RejectsInvalidConfig) {
    AdamConfig cfg;
    cfg.learning_rate = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.beta2 = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Lbfgs, ConvexQuadraticMatchesDirectSolve) {
    const Quadratic q = random_quadratic(5, 42);
    LbfgsConfig cfg;
    cfg.grad_tolerance = 1e-11;
    cfg.param_change_tolerance = 1e-300;
    cfg.max_iterations = 30;
    const auto r = lbfgs_run(q, VectorXd::Zero(5), cfg);
    const VectorXd xstar = q.A.ldlt().solve(q.b);
    EXPECT_EQ(r.reason, StopReason::grad_tolerance);
    EXPECT_LE(r.iterations, 30);
    EXPECT_LT((q.A * r.params - q.b).norm(), 1e-10);
    EXPECT_LT((r.params - xstar).norm(), 1e-9);
}

TEST(Lbfgs, RosenbrockReachesMinimizer) {
    LbfgsConfig cfg;
    cfg.grad_tolerance = 1e-10;
    cfg.param_change_tolerance = 1e-300;
    cfg.max_iterations = 500;
    VectorXd x0(2);
    x0 << -1.2, 1.0;
    const auto r = lbfgs_run(rosenbrock, x0, cfg);
    EXPECT_LT(std::abs(r.params[0] - 1.0), 1e-6);
    EXPECT_LT(std::abs(r.params[1] - 1.0), 1e-6);
}

TEST(Lbfgs, StartAtMinimumStopsImmediately) {
    const Quadratic q = random_quadratic(4, 1);
    const VectorXd xstar = q.A.ldlt().solve(q.b);
    int evals = 0;
    auto f = [&](const VectorXd& x, VectorXd& g) {
        ++evals;
        const double v = q(x, g);
        g.setZero();
        return v;
    };
    const auto r = lbfgs_run(f, xstar, LbfgsConfig{});
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(r.reason, StopReason::grad_tolerance);
    EXPECT_EQ(r.params, xstar);
    EXPECT_EQ(evals, 1);
}

TEST(Lbfgs, AcceptedLossesNeverIncrease) {
    std::ostringstream trace;
    LbfgsConfig cfg;
    cfg.max_iterations = 200;
    VectorXd x0(2);
    x0 << -1.2, 1.0;
    VectorXd g0(2);
    const double f0 = rosenbrock(x0, g0);
    lbfgs_run(rosenbrock, x0, cfg, &trace);
    const auto losses = trace_losses(trace.str());
    ASSERT_FALSE(losses.empty());
    EXPECT_LE(losses.front(), f0);
    // Acceptance admits roundoff-level ties near the minimum, never a real increase.
    for (std::size_t i = 1; i < losses.size(); ++i) {
        EXPECT_LE(losses[i], losses[i - 1] + 1e-14 * std::abs(losses[i - 1])) << "step " << i;
    }
}

TEST(Lbfgs, Deterministic) {
    VectorXd x0(2);
    x0 << -1.2, 1.0;
    std::ostringstream t1, t2;
    const auto a = lbfgs_run(rosenbrock, x0, LbfgsConfig{}, &t1);
    const auto b = lbfgs_run(rosenbrock, x0, LbfgsConfig{}, &t2);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(t1.str(), t2.str());
}

TEST(Lbfgs, InconsistentGradientEndsWithLineSearchFailure) {
    auto f = [](const VectorXd& x, VectorXd& g) {
        g = -2.0 * x;
        return x.squaredNorm();
    };
    VectorXd x0(2);
    x0 << 1.0, -0.5;
    const auto r = lbfgs_run(f, x0, LbfgsConfig{});
    EXPECT_EQ(r.reason, StopReason::line_search_failed);
    EXPECT_EQ(r.params, x0);
}

TEST(Lbfgs, ParamChangeToleranceStops) {
    const Quadratic q = random_quadratic(3, 9);
    LbfgsConfig cfg;
    cfg.grad_tolerance = 1e-300;
    cfg.param_change_tolerance = 1e-3;
    const auto r = lbfgs_run(q, VectorXd::Zero(3), cfg);
    EXPECT_EQ(r.reason, StopReason::param_change);
}

TEST(Lbfgs, MaxIterationsHonoured) {
    LbfgsConfig cfg;
    cfg.max_iterations = 3;
    VectorXd x0(2);
    x0 << -1.2, 1.0;
    const auto r = lbfgs_run(rosenbrock, x0, cfg);
    EXPECT_EQ(r.iterations, 3);
    EXPECT_EQ(r.reason, StopReason::max_iterations);
}

TEST(Optim, TraceHeader) {
    std::ostringstream t;
    auto f = [](const VectorXd& x, VectorXd& g) {
        g = x;
        return 0.5 * x.squaredNorm();
    };
    AdamConfig cfg;
    cfg.epochs = 2;
    adam_run(f, VectorXd::Ones(2), cfg, 0, &t);
    EXPECT_EQ(t.str().substr(0, t.str().find('\n')), "iteration,loss,grad_norm,step_size");
    EXPECT_EQ(trace_losses(t.str()).size(), 2u);
}

}  // namespace
}  // namespace metalic
