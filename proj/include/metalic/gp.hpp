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

/// Exact Gaussian-process regression of rewards over (context, interface mask).
///
///   k((c, a), (c', a')) = exp(-tau1 |c - c'|^2) * exp(tau2 * overlap(a, a'))
///   overlap(a, a')      = (1/9) #{i : a_i = a'_i}
///
/// Zero prior mean. Observations carry noise_var; jitter is added to the diagonal only when the
/// Cholesky factorization fails, escalating by 10x up to 1e-4.

#include "metalic/csv.hpp"
#include "metalic/error.hpp"
#include "metalic/interface.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <array>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace metalic {

struct KernelParams {
    double tau1 = 25.0;
    double tau2 = 2.0;
    double noise_var = 1e-2;
    /// First diagonal jitter tried when the factorization fails.
    double jitter = 1e-8;

    void validate() const {
        if (!(tau1 > 0.0)) throw ConfigError("gp.tau1", "must be > 0");
        if (!(tau2 > 0.0)) throw ConfigError("gp.tau2", "must be > 0");
        if (!(noise_var >= 0.0)) throw ConfigError("gp.noise_var", "must be >= 0");
        if (!(jitter > 0.0)) throw ConfigError("gp.jitter", "must be > 0");
    }
};

constexpr double kMaxJitter = 1e-4;

/// Number of agreeing slots between two masks given by index.
inline int mask_agreement(int a, int b) noexcept {
    return kNumConditions - std::popcount(static_cast<unsigned>(a ^ b) & (kNumActions - 1u));
}

inline double overlap_ratio(const Action& a, const Action& b) noexcept {
    return mask_agreement(action_index(a), action_index(b)) / static_cast<double>(kNumConditions);
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("context dimensions differ");
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - y[i]) * (x[i] - y[i]);
    return d;
}

/// The product kernel. Parameters are not range-checked so that degenerate values can be probed.
inline double kernel_eval(const KernelParams& p, std::span<const double> ctx, const Action& a,
                          std::span<const double> ctx2, const Action& a2) {
    return std::exp(-p.tau1 * squared_distance(ctx, ctx2)) * std::exp(p.tau2 * overlap_ratio(a, a2));
}

class RewardDataset {
public:
    explicit RewardDataset(int context_dim = 1) : dim_(context_dim) {
        if (context_dim < 1) throw std::invalid_argument("RewardDataset: context dimension must be >= 1");
    }

    void add(std::span<const double> context, const Action& a, double reward) {
        if (static_cast<int>(context.size()) != dim_) {
            throw std::invalid_argument("RewardDataset: context has " + std::to_string(context.size()) +
                                        " entries, expected " + std::to_string(dim_));
        }
        if (!std::isfinite(reward)) throw NumericalError("RewardDataset: non-finite reward");
        contexts_.insert(contexts_.end(), context.begin(), context.end());
        actions_.push_back(action_index(a));
        rewards_.push_back(reward);
    }

    int context_dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return rewards_.size(); }
    bool empty() const noexcept { return rewards_.empty(); }
    std::span<const double> context(std::size_t i) const {
        return {contexts_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    int action(std::size_t i) const { return actions_.at(i); }
    double reward(std::size_t i) const { return rewards_.at(i); }

    /// Copy with one context column replaced through `f`.
    template <typename F>
    RewardDataset map_column(int col, F&& f) const {
        RewardDataset out = *this;
        for (std::size_t i = 0; i < size(); ++i) {
            double& v = out.contexts_[i * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(col)];
            v = f(v);
        }
        return out;
    }

private:
    int dim_;
    std::vector<double> contexts_;
    std::vector<int> actions_;
    std::vector<double> rewards_;
};

struct GpPrediction {
    double mean = 0.0;
    double variance = 0.0;

    double stddev() const { return std::sqrt(variance); }
};

class GpPosterior {
public:
    /// Prior with no data.
    GpPosterior() = default;

    static GpPosterior fit(const RewardDataset& data, const KernelParams& p) {
        p.validate();
        GpPosterior g;
        g.params_ = p;
        g.data_ = data;
        const auto n = static_cast<Eigen::Index>(data.size());
        if (n == 0) {
            g.fitted_ = true;
            return g;
        }
        Eigen::MatrixXd K(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) {
                const double k = std::exp(-p.tau1 * squared_distance(data.context(i), data.context(j)) +
                                          p.tau2 * mask_agreement(data.action(i), data.action(j)) / 9.0);
                K(i, j) = K(j, i) = k;
            }
        }
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) y[i] = data.reward(static_cast<std::size_t>(i));
        g.factor(K, y);
        return g;
    }

    bool fitted() const noexcept { return fitted_; }
    const KernelParams& params() const noexcept { return params_; }
    const RewardDataset& data() const noexcept { return data_; }
    /// Diagonal jitter that the factorization needed (0 when none).
    double jitter_used() const noexcept { return jitter_used_; }

    GpPrediction predict(std::span<const double> ctx, const Action& a) const {
        require_fitted();
        const auto n = static_cast<Eigen::Index>(data_.size());
        GpPrediction out{0.0, std::exp(params_.tau2) + params_.noise_var};
        if (n == 0) return out;
        Eigen::VectorXd ks(n);
        const int ai = action_index(a);
        for (Eigen::Index i = 0; i < n; ++i) {
            ks[i] = std::exp(-params_.tau1 * squared_distance(ctx, data_.context(i)) +
                             params_.tau2 * mask_agreement(ai, data_.action(i)) / 9.0);
        }
        out.mean = ks.dot(alpha_);
        const Eigen::VectorXd v = llt_.matrixL().solve(ks);
        out.variance = std::max(0.0, std::exp(params_.tau2) - v.squaredNorm() + params_.noise_var);
        return out;
    }

    /// Predictions for every mask at one context, indexed by action index.
    std::vector<GpPrediction> predict_all(std::span<const double> ctx) const {
        require_fitted();
        const auto n = static_cast<Eigen::Index>(data_.size());
        const double prior = std::exp(params_.tau2);
        std::vector<GpPrediction> out(kNumActions, GpPrediction{0.0, prior + params_.noise_var});
        if (n == 0) return out;
        Eigen::VectorXd kc(n);
        for (Eigen::Index i = 0; i < n; ++i) kc[i] = std::exp(-params_.tau1 * squared_distance(ctx, data_.context(i)));
        std::array<double, kNumConditions + 1> ko{};
        for (int m = 0; m <= kNumConditions; ++m) ko[m] = std::exp(params_.tau2 * m / 9.0);
        Eigen::MatrixXd Ks(n, kNumActions);
        for (int a = 0; a < kNumActions; ++a) {
            for (Eigen::Index i = 0; i < n; ++i) Ks(i, a) = kc[i] * ko[mask_agreement(a, data_.action(i))];
        }
        const Eigen::VectorXd means = Ks.transpose() * alpha_;
        llt_.matrixL().solveInPlace(Ks);
        for (int a = 0; a < kNumActions; ++a) {
            out[a].mean = means[a];
            out[a].variance = std::max(0.0, prior - Ks.col(a).squaredNorm() + params_.noise_var);
        }
        return out;
    }

    /// log p(y | X) = -y' alpha / 2 - sum log diag(L) - n/2 log(2 pi); 0 for an empty dataset.
    double log_marginal_likelihood() const {
        require_fitted();
        return lml_;
    }

private:
    void require_fitted() const {
        if (!fitted_) throw std::logic_error("GpPosterior: predict before fit");
    }

    void factor(const Eigen::MatrixXd& K, const Eigen::VectorXd& y) {
        const Eigen::Index n = K.rows();
        Eigen::MatrixXd A = K;
        A.diagonal().array() += params_.noise_var;
        double jitter = 0.0;
        for (;;) {
            Eigen::MatrixXd B = A;
            B.diagonal().array() += jitter;
            llt_.compute(B);
            if (llt_.info() == Eigen::Success && (llt_.matrixLLT().diagonal().array() > 0.0).all()) break;
            jitter = jitter == 0.0 ? params_.jitter : 10.0 * jitter;
            if (jitter > kMaxJitter * (1.0 + 1e-12)) {
                throw NumericalError("GpPosterior: Gram matrix not positive definite with jitter up to 1e-4");
            }
        }
        jitter_used_ = jitter;
        alpha_ = llt_.solve(y);
        lml_ = -0.5 * y.dot(alpha_) - llt_.matrixLLT().diagonal().array().log().sum() -
               0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
        fitted_ = true;
    }

    KernelParams params_;
    RewardDataset data_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    double jitter_used_ = 0.0;
    double lml_ = 0.0;
    bool fitted_ = false;
};

inline GpPosterior gp_fit(const RewardDataset& data, const KernelParams& p) { return GpPosterior::fit(data, p); }

// ---------------------------------------------------------------------------------------------
// Hyperparameters

/// Log10 grid over (tau1, tau2, noise_var) followed by a coordinate pattern search in log space.
struct HyperSearch {
    double log10_tau1_lo = -1.0, log10_tau1_hi = 3.0;
    double log10_tau2_lo = -2.0, log10_tau2_hi = 1.0;
    double log10_noise_lo = -6.0, log10_noise_hi = 0.0;
    /// Grid spacing in decades.
    double step = 0.5;
    /// Pattern-search halvings after the grid.
    int refine_rounds = 6;
    /// Fewer rows than this keep the defaults.
    std::size_t min_rows = 5;
};

inline std::vector<double> log_grid(double lo, double hi, double step) {
    std::vector<double> v;
    const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
    for (int i = 0; i <= n; ++i) v.push_back(lo + i * step);
    return v;
}

/// Maximize the exact log marginal likelihood. Deterministic given the data.
inline KernelParams optimize_hypers(const RewardDataset& data, const HyperSearch& s = {},
                                    const KernelParams& defaults = {}) {
    if (data.size() < s.min_rows) return defaults;
    const auto n = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd D(n, n), O(n, n);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y[i] = data.reward(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j <= i; ++j) {
            D(i, j) = D(j, i) = squared_distance(data.context(i), data.context(j));
            O(i, j) = O(j, i) = mask_agreement(data.action(i), data.action(j)) / 9.0;
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt;
    auto lml = [&](const std::array<double, 3>& x) {
        const double t1 = std::pow(10.0, x[0]), t2 = std::pow(10.0, x[1]), nv = std::pow(10.0, x[2]);
        Eigen::MatrixXd K = (-t1 * D + t2 * O).array().exp().matrix();
        K.diagonal().array() += nv + defaults.jitter;
        llt.compute(K);
        if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
        const Eigen::VectorXd a = llt.solve(y);
        const double v = -0.5 * y.dot(a) - llt.matrixLLT().diagonal().array().log().sum() -
                         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    };
    std::array<double, 3> best{std::log10(defaults.tau1), std::log10(defaults.tau2),
                               std::log10(std::max(defaults.noise_var, 1e-300))};
    double best_v = lml(best);
    for (double a : log_grid(s.log10_tau1_lo, s.log10_tau1_hi, s.step)) {
        for (double b : log_grid(s.log10_tau2_lo, s.log10_tau2_hi, s.step)) {
            for (double c : log_grid(s.log10_noise_lo, s.log10_noise_hi, s.step)) {
                const std::array<double, 3> x{a, b, c};
                const double v = lml(x);
                if (v > best_v) {
                    best_v = v;
                    best = x;
                }
            }
        }
    }
    const std::array<std::pair<double, double>, 3> box{{{s.log10_tau1_lo, s.log10_tau1_hi},
                                                        {s.log10_tau2_lo, s.log10_tau2_hi},
                                                        {s.log10_noise_lo, s.log10_noise_hi}}};
    double h = s.step / 2.0;
    for (int round = 0; round < s.refine_rounds; ++round, h /= 2.0) {
        bool moved = true;
        while (moved) {
            moved = false;
            for (int d = 0; d < 3; ++d) {
                for (double dir : {-1.0, 1.0}) {
                    std::array<double, 3> x = best;
                    x[d] = std::clamp(x[d] + dir * h, box[d].first, box[d].second);
                    const double v = lml(x);
                    if (v > best_v) {
                        best_v = v;
                        best = x;
                        moved = true;
                    }
                }
            }
        }
    }
    KernelParams out = defaults;
    out.tau1 = std::pow(10.0, best[0]);
    out.tau2 = std::pow(10.0, best[1]);
    out.noise_var = std::pow(10.0, best[2]);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Persistence: context columns, nine mask columns, reward.

inline void write_dataset_csv(const RewardDataset& d, std::ostream& os) {
    std::vector<std::string> header;
    for (int c = 0; c < d.context_dim(); ++c) header.push_back("ctx" + std::to_string(c));
    for (int m = 0; m < kNumConditions; ++m) header.push_back("m" + std::to_string(m));
    header.push_back("reward");
    CsvWriter w(os, header);
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (double v : d.context(i)) w << v;
        const Action a = action_from_index(d.action(i));
        for (bool b : a.mask) w << (b ? 1 : 0);
        w << d.reward(i);
        w.end_row();
    }
}

inline RewardDataset read_dataset_csv(std::istream& is, const std::string& what = "dataset") {
    const CsvTable t = read_csv(is, what);
    int dim = 0;
    while (true) {
        bool found = false;
        for (const auto& h : t.header) found = found || h == "ctx" + std::to_string(dim);
        if (!found) break;
        ++dim;
    }
    if (dim == 0) throw SchemaError(what + ": no context columns");
    RewardDataset d(dim);
    std::vector<double> ctx(static_cast<std::size_t>(dim));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (int c = 0; c < dim; ++c) ctx[c] = t.real(r, "ctx" + std::to_string(c));
        Action a;
        for (int m = 0; m < kNumConditions; ++m) a.mask[m] = t.text(r, "m" + std::to_string(m)) == "1";
        d.add(ctx, a, t.real(r, "reward"));
    }
    return d;
}

}  // namespace metalic
