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

/// Full-batch ADAM and L-BFGS with a strong-Wolfe line search.

#include "metalic/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace metalic {

/// Returns f(x) and writes the gradient into `grad` (already sized like x).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int epochs = 10000;
    /// Losses above this abort the run with StopReason::diverged.
    double divergence_threshold = std::numeric_limits<double>::infinity();

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("adam.learning_rate", "must be > 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam.beta1", "must lie in [0, 1)");
        if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam.beta2", "must lie in [0, 1)");
        if (!(epsilon > 0.0)) throw ConfigError("adam.epsilon", "must be > 0");
        if (epochs < 0) throw ConfigError("adam.epochs", "must be >= 0");
    }
};

struct LineSearchConfig {
    double c1 = 1e-4;
    double c2 = 0.9;
    int max_trials = 25;
};

struct LbfgsConfig {
    int max_iterations = 50000;
    /// Stop when max_i |g_i| falls to this value.
    double grad_tolerance = 1e-6;
    /// Stop when an accepted step moves no coordinate by more than this.
    double param_change_tolerance = 1e-9;
    int memory = 10;
    LineSearchConfig line_search;
    double divergence_threshold = std::numeric_limits<double>::infinity();

    void validate() const {
        if (max_iterations < 0) throw ConfigError("lbfgs.max_iterations", "must be >= 0");
        if (!(grad_tolerance > 0.0)) throw ConfigError("lbfgs.grad_tolerance", "must be > 0");
        if (!(param_change_tolerance > 0.0)) throw ConfigError("lbfgs.param_change_tolerance", "must be > 0");
        if (memory < 1) throw ConfigError("lbfgs.memory", "must be >= 1");
        const auto& ls = line_search;
        if (!(ls.c1 > 0.0 && ls.c1 < ls.c2 && ls.c2 < 1.0)) {
            throw ConfigError("lbfgs.line_search", "need 0 < c1 < c2 < 1");
        }
        if (ls.max_trials < 1) throw ConfigError("lbfgs.line_search.max_trials", "must be >= 1");
    }
};

enum class StopReason { max_iterations, grad_tolerance, param_change, line_search_failed, diverged };

inline const char* to_string(StopReason r) {
    switch (r) {
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::grad_tolerance: return "grad_tolerance";
    case StopReason::param_change: return "param_change";
    case StopReason::line_search_failed: return "line_search_failed";
    case StopReason::diverged: return "diverged";
    }
    return "unknown";
}

struct OptimResult {
    Eigen::VectorXd params;
    double loss = 0.0;
    int iterations = 0;
    int evaluations = 0;
    StopReason reason = StopReason::max_iterations;
};

/// Per-iteration CSV trace: iteration,loss,grad_norm,step_size.
class TraceWriter {
public:
    explicit TraceWriter(std::ostream* os) : os_(os) {
        if (os_) *os_ << "iteration,loss,grad_norm,step_size\n";
    }
    void row(int iteration, double loss, double grad_norm, double step) {
        if (os_) *os_ << iteration << ',' << loss << ',' << grad_norm << ',' << step << '\n';
    }

private:
    std::ostream* os_;
};

namespace detail {

inline double checked_eval(const Objective& f, const Eigen::VectorXd& x, Eigen::VectorXd& g,
                           const char* who, int iteration) {
    const double v = f(x, g);
    if (!std::isfinite(v) || !g.allFinite()) {
        throw NumericalError(std::string(who) + ": non-finite loss " + std::to_string(v) + " at iteration " +
                                 std::to_string(iteration),
                             std::vector<double>(x.data(), x.data() + x.size()));
    }
    return v;
}

}  // namespace detail

/// Bias-corrected ADAM over the full batch. The gradient is deterministic, so `seed` does not
/// influence the iterates; it is accepted for interface symmetry with stochastic variants.
inline OptimResult adam_run(const Objective& f, Eigen::VectorXd x, const AdamConfig& cfg,
                            std::uint64_t seed = 0, std::ostream* trace = nullptr) {
    (void)seed;
    cfg.validate();
    TraceWriter tw(trace);
    const Eigen::Index n = x.size();
    Eigen::VectorXd g(n), m = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n);
    OptimResult out;
    double b1t = 1.0, b2t = 1.0;
    for (int t = 0; t < cfg.epochs; ++t) {
        const double loss = detail::checked_eval(f, x, g, "adam", t);
        ++out.evaluations;
        if (loss > cfg.divergence_threshold) {
            out.params = std::move(x);
            out.loss = loss;
            out.iterations = t;
            out.reason = StopReason::diverged;
            return out;
        }
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        const double c1 = 1.0 / (1.0 - b1t), c2 = 1.0 / (1.0 - b2t);
        double max_step = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double step = cfg.learning_rate * (m[i] * c1) / (std::sqrt(v[i] * c2) + cfg.epsilon);
            x[i] -= step;
            max_step = std::max(max_step, std::abs(step));
        }
        tw.row(t, loss, g.lpNorm<Eigen::Infinity>(), max_step);
    }
    out.loss = detail::checked_eval(f, x, g, "adam", cfg.epochs);
    ++out.evaluations;
    out.iterations = cfg.epochs;
    out.reason = out.loss > cfg.divergence_threshold ? StopReason::diverged : StopReason::max_iterations;
    out.params = std::move(x);
    return out;
}

namespace detail {

/// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), clamped into the bracket.
inline double cubic_min(double a, double fa, double da, double b, double fb, double db) {
    const double lo = std::min(a, b), hi = std::max(a, b);
    const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - da * db;
    double t = 0.5 * (lo + hi);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), b - a);
        const double cand = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
        if (std::isfinite(cand)) t = cand;
    }
    // Keep away from the bracket ends so the interval shrinks.
    const double margin = 0.1 * (hi - lo);
    return std::clamp(t, lo + margin, hi - margin);
}

struct LinePoint {
    double alpha = 0.0;
    double f = 0.0;
    double slope = 0.0;
};

struct LineSearchOutcome {
    bool ok = false;
    double alpha = 0.0;
    double f = 0.0;
    Eigen::VectorXd x;
    Eigen::VectorXd g;
};

/// Strong-Wolfe search along d from x (bracketing then zoom). Only points that satisfy sufficient
/// decrease are ever returned, so an accepted step never increases f.
inline LineSearchOutcome strong_wolfe(const Objective& f, const Eigen::VectorXd& x, double f0,
                                      const Eigen::VectorXd& g0, const Eigen::VectorXd& d, double alpha0,
                                      const LineSearchConfig& cfg, int& evaluations) {
    const double slope0 = g0.dot(d);
    LineSearchOutcome best;
    Eigen::VectorXd xt(x.size()), gt(x.size());
    auto probe = [&](double alpha) {
        xt = x + alpha * d;
        const double ft = f(xt, gt);
        ++evaluations;
        const bool finite = std::isfinite(ft) && gt.allFinite();
        LinePoint p{alpha, finite ? ft : std::numeric_limits<double>::infinity(),
                    finite ? gt.dot(d) : std::numeric_limits<double>::quiet_NaN()};
        const bool armijo = finite && ft <= f0 + cfg.c1 * alpha * slope0 && ft < f0;
        if (armijo && (!best.ok || ft < best.f)) {
            best.ok = true;
            best.alpha = alpha;
            best.f = ft;
            best.x = xt;
            best.g = gt;
        }
        return p;
    };
    // Near a minimum the sufficient-decrease test drowns in roundoff of f. A value within
    // kRoundoff * |f0| of f0 with the curvature condition met is then accepted (approximate Wolfe).
    constexpr double kRoundoff = 1e-14;
    auto wolfe_met = [&](const LinePoint& p) {
        const bool decrease = p.f <= f0 + cfg.c1 * p.alpha * slope0 || p.f <= f0 + kRoundoff * std::abs(f0);
        return decrease && std::abs(p.slope) <= -cfg.c2 * slope0;
    };
    // The most recent probe is the one being accepted, so xt and gt hold its state.
    auto accept = [&](const LinePoint& p) { return LineSearchOutcome{true, p.alpha, p.f, xt, gt}; };
    LinePoint prev{0.0, f0, slope0};
    double alpha = alpha0;
    int trials = 0;
    LinePoint lo, hi;
    bool bracketed = false;
    while (trials < cfg.max_trials) {
        const LinePoint cur = probe(alpha);
        ++trials;
        if (!std::isfinite(cur.f)) {
            // Overshot into a non-finite region: shrink toward the last good point.
            lo = prev;
            hi = cur;
            hi.slope = std::numeric_limits<double>::quiet_NaN();
            bracketed = true;
            break;
        }
        if (wolfe_met(cur)) return accept(cur);
        if (cur.f > f0 + cfg.c1 * cur.alpha * slope0 || (trials > 1 && cur.f >= prev.f)) {
            lo = prev;
            hi = cur;
            bracketed = true;
            break;
        }
        if (cur.slope >= 0.0) {
            lo = cur;
            hi = prev;
            bracketed = true;
            break;
        }
        prev = cur;
        alpha *= 2.0;
    }
    if (!bracketed) return best;

    while (trials < cfg.max_trials) {
        double a;
        if (std::isfinite(hi.f) && std::isfinite(hi.slope)) {
            a = cubic_min(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope);
        } else {
            a = 0.5 * (lo.alpha + hi.alpha);
        }
        const LinePoint cur = probe(a);
        ++trials;
        if (std::isfinite(cur.f) && wolfe_met(cur)) return accept(cur);
        if (!std::isfinite(cur.f) || cur.f > f0 + cfg.c1 * cur.alpha * slope0 || cur.f >= lo.f) {
            hi = cur;
            if (!std::isfinite(cur.f)) hi.slope = std::numeric_limits<double>::quiet_NaN();
        } else {
            if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
            lo = cur;
        }
        if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
    }
    return best;
}

}  // namespace detail

/// L-BFGS with two-loop recursion. Curvature pairs with s'y <= 0 are skipped. A failed line search
/// restarts once from the steepest-descent direction with cleared memory; a second consecutive
/// failure stops with StopReason::line_search_failed.
inline OptimResult lbfgs_run(const Objective& f, Eigen::VectorXd x, const LbfgsConfig& cfg,
                             std::ostream* trace = nullptr) {
    cfg.validate();
    TraceWriter tw(trace);
    OptimResult out;
    Eigen::VectorXd g(x.size());
    double fx = detail::checked_eval(f, x, g, "lbfgs", 0);
    out.evaluations = 1;

    std::deque<Eigen::VectorXd> S, Y;
    std::deque<double> rho;
    std::vector<double> alpha_buf(cfg.memory);
    Eigen::VectorXd d(x.size());
    bool steepest_retry = false;

    int it = 0;
    for (;; ++it) {
        if (fx > cfg.divergence_threshold) {
            out.reason = StopReason::diverged;
            break;
        }
        if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tolerance) {
            out.reason = StopReason::grad_tolerance;
            break;
        }
        if (it >= cfg.max_iterations) {
            out.reason = StopReason::max_iterations;
            break;
        }

        // Two-loop recursion: d = -H g.
        d = -g;
        const int m = static_cast<int>(S.size());
        for (int i = m - 1; i >= 0; --i) {
            alpha_buf[i] = rho[i] * S[i].dot(d);
            d -= alpha_buf[i] * Y[i];
        }
        if (m > 0) d *= S.back().dot(Y.back()) / Y.back().squaredNorm();
        for (int i = 0; i < m; ++i) {
            const double beta = rho[i] * Y[i].dot(d);
            d += (alpha_buf[i] - beta) * S[i];
        }
        if (!(g.dot(d) < 0.0)) {
            S.clear();
            Y.clear();
            rho.clear();
            d = -g;
        }
        const double alpha0 = S.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;

        auto ls = detail::strong_wolfe(f, x, fx, g, d, alpha0, cfg.line_search, out.evaluations);
        if (!ls.ok) {
            // Retrying steepest descent from the same point cannot succeed where it just failed.
            if (steepest_retry || S.empty()) {
                out.reason = StopReason::line_search_failed;
                break;
            }
            S.clear();
            Y.clear();
            rho.clear();
            steepest_retry = true;
            --it;
            continue;
        }
        steepest_retry = false;

        Eigen::VectorXd s = ls.x - x;
        Eigen::VectorXd y = ls.g - g;
        const double max_change = s.lpNorm<Eigen::Infinity>();
        x = std::move(ls.x);
        g = std::move(ls.g);
        fx = ls.f;
        tw.row(it, fx, g.lpNorm<Eigen::Infinity>(), ls.alpha);
        const double sy = s.dot(y);
        if (sy > 0.0) {
            if (static_cast<int>(S.size()) == cfg.memory) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
        }
        if (max_change <= cfg.param_change_tolerance) {
            ++it;
            out.reason = StopReason::param_change;
            break;
        }
    }
    out.params = std::move(x);
    out.loss = fx;
    out.iterations = it;
    return out;
}

}  // namespace metalic
