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

/// Multi-domain PINN loss, two-phase training and solution error.
///
/// The loss over all subdomain networks, optimized jointly, is
///
///   L = sum_k [ lambda_b mean_boundary (u_k - g)^2 + mean_collocation r_k^2 ]
///       + lambda_I sum_interfaces interface_loss(action)
///
/// Single-network baselines use the same loss with one network over the union of the point sets
/// and no interface terms.

#include "metalic/csv.hpp"
#include "metalic/error.hpp"
#include "metalic/ground_truth.hpp"
#include "metalic/interface.hpp"
#include "metalic/mlp.hpp"
#include "metalic/optim.hpp"
#include "metalic/problems.hpp"
#include "metalic/rng.hpp"
#include "metalic/sampling.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace metalic {

struct LossWeights {
    double lambda_b = 20.0;
    double lambda_i = 5.0;
    /// Count each neighbour pair once instead of once from each side.
    bool halve_pairs = false;

    void validate() const {
        if (!(lambda_b > 0.0)) throw ConfigError("weights.lambda_b", "must be > 0");
        if (!(lambda_i > 0.0)) throw ConfigError("weights.lambda_i", "must be > 0");
    }
};

/// Training points owned by one network.
struct NetPoints {
    Points collocation;
    Points boundary;
    Eigen::VectorXd boundary_values;
    /// Closed region where this network represents the solution.
    std::vector<Box> region;
};

struct LossLayout {
    std::vector<NetPoints> nets;
    /// Interface point sets; `a` and `b` index into `nets`.
    std::vector<InterfacePoints> interfaces;
};

/// One network per subdomain.
inline LossLayout multi_domain_layout(const PdeProblem& p, const PointSets& ps) {
    LossLayout out;
    for (std::size_t k = 0; k < p.subdomains.size(); ++k) {
        out.nets.push_back({ps.collocation[k], ps.boundary[k], ps.boundary_values[k], p.subdomains[k].boxes});
    }
    out.interfaces = ps.interfaces;
    return out;
}

/// A single network over the union of all subdomain point sets.
inline LossLayout merged_layout(const PdeProblem& p, const PointSets& ps) {
    Eigen::Index nc = 0, nb = 0;
    for (std::size_t k = 0; k < ps.collocation.size(); ++k) {
        nc += ps.collocation[k].rows();
        nb += ps.boundary[k].rows();
    }
    NetPoints net{Points(nc, 2), Points(nb, 2), Eigen::VectorXd(nb), {p.domain}};
    nc = nb = 0;
    for (std::size_t k = 0; k < ps.collocation.size(); ++k) {
        net.collocation.middleRows(nc, ps.collocation[k].rows()) = ps.collocation[k];
        net.boundary.middleRows(nb, ps.boundary[k].rows()) = ps.boundary[k];
        net.boundary_values.segment(nb, ps.boundary[k].rows()) = ps.boundary_values[k];
        nc += ps.collocation[k].rows();
        nb += ps.boundary[k].rows();
    }
    LossLayout out;
    out.nets.push_back(std::move(net));
    return out;
}

/// Unweighted loss components.
struct LossBreakdown {
    std::vector<double> boundary;
    std::vector<double> residual;
    /// Per catalog slot, summed over interfaces and including the pair multiplicity.
    std::array<double, kNumConditions> interface{};
    double total = 0.0;
};

class MultiDomainLoss {
public:
    MultiDomainLoss(const PdeProblem& problem, LossLayout layout, const MlpSpec& spec, const LossWeights& weights,
                    const Action& action)
        : problem_(&problem),
          layout_(std::move(layout)),
          spec_(spec),
          weights_(weights),
          action_(action),
          catalog_(catalog(problem.family)),
          per_net_(static_cast<Eigen::Index>(spec.param_count())) {
        spec.validate();
        weights.validate();
        if (layout_.nets.empty()) throw std::invalid_argument("MultiDomainLoss: no networks");
        for (const NetPoints& n : layout_.nets) {
            if (n.boundary.rows() != n.boundary_values.size()) {
                throw std::invalid_argument("MultiDomainLoss: boundary values do not match boundary points");
            }
        }
        tapes_.resize(layout_.nets.size());
        iface_tapes_.resize(layout_.interfaces.size());
        interface_degree_ = required_degree(action_, catalog_, problem);
    }

    Eigen::Index size() const noexcept { return per_net_ * static_cast<Eigen::Index>(layout_.nets.size()); }
    Eigen::Index params_per_net() const noexcept { return per_net_; }
    std::size_t num_nets() const noexcept { return layout_.nets.size(); }
    const Action& action() const noexcept { return action_; }
    const LossLayout& layout() const noexcept { return layout_; }
    const MlpSpec& spec() const noexcept { return spec_; }

    double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) { return evaluate(theta, &grad, nullptr); }
    double value(const Eigen::VectorXd& theta) { return evaluate(theta, nullptr, nullptr); }
    LossBreakdown breakdown(const Eigen::VectorXd& theta) {
        LossBreakdown b;
        evaluate(theta, nullptr, &b);
        return b;
    }

    /// Objective adapter for the optimizers.
    Objective objective() {
        return [this](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) { return (*this)(theta, grad); };
    }

private:
    struct NetTapes {
        MlpJetTape collocation, boundary;
        Eigen::MatrixXd collocation_adj, boundary_adj;
    };
    struct InterfaceTapes {
        MlpJetTape a, b;
        Eigen::MatrixXd ja, jb, adj_a, adj_b;
    };

    std::span<const double> net_span(const Eigen::VectorXd& theta, std::size_t k) const {
        return {theta.data() + static_cast<Eigen::Index>(k) * per_net_, static_cast<std::size_t>(per_net_)};
    }
    std::span<double> grad_span(Eigen::VectorXd& grad, std::size_t k) const {
        return {grad.data() + static_cast<Eigen::Index>(k) * per_net_, static_cast<std::size_t>(per_net_)};
    }

    static void require_finite(double v, const std::string& term) {
        if (!std::isfinite(v)) throw NumericalError("loss term " + term + " is not finite (" + std::to_string(v) + ")");
    }

    double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad, LossBreakdown* parts) {
        if (theta.size() != size()) throw std::invalid_argument("MultiDomainLoss: parameter length mismatch");
        if (grad) grad->setZero(size());
        if (parts) {
            parts->boundary.assign(layout_.nets.size(), 0.0);
            parts->residual.assign(layout_.nets.size(), 0.0);
            parts->interface.fill(0.0);
        }
        const PdeProblem& p = *problem_;
        const int rdeg = p.residual_order();
        double total = 0.0;
        for (std::size_t k = 0; k < layout_.nets.size(); ++k) {
            const NetPoints& np = layout_.nets[k];
            NetTapes& t = tapes_[k];
            double lb = 0.0, lr = 0.0;
            const Eigen::Index nb = np.boundary.rows(), nc = np.collocation.rows();
            if (nb > 0) {
                t.boundary.forward(spec_, net_span(theta, k), np.boundary, 0);
                const auto u = t.boundary.jets().col(0);
                const Eigen::VectorXd e = u - np.boundary_values;
                lb = e.squaredNorm() / static_cast<double>(nb);
                require_finite(lb, "boundary[" + std::to_string(k) + "]");
                if (grad) {
                    t.boundary_adj = (2.0 * weights_.lambda_b / static_cast<double>(nb)) * e;
                    t.boundary.backward(t.boundary_adj, grad_span(*grad, k));
                }
            }
            if (nc > 0) {
                t.collocation.forward(spec_, net_span(theta, k), np.collocation, rdeg);
                const Eigen::MatrixXd& jets = t.collocation.jets();
                if (grad) t.collocation_adj.setZero(nc, jets.cols());
                const double inv = 1.0 / static_cast<double>(nc);
                for (Eigen::Index i = 0; i < nc; ++i) {
                    const JetRow row(jets, i);
                    const Lin r = residual(p, row, {np.collocation(i, 0), np.collocation(i, 1)});
                    lr += r.v * r.v;
                    if (grad) row.scatter(r, 2.0 * inv * r.v, t.collocation_adj);
                }
                lr *= inv;
                require_finite(lr, "residual[" + std::to_string(k) + "]");
                if (grad) t.collocation.backward(t.collocation_adj, grad_span(*grad, k));
            }
            total += weights_.lambda_b * lb + lr;
            if (parts) {
                parts->boundary[k] = lb;
                parts->residual[k] = lr;
            }
        }
        if (action_.count() > 0) {
            const double mult = pair_multiplicity(weights_.halve_pairs);
            for (std::size_t i = 0; i < layout_.interfaces.size(); ++i) {
                const InterfacePoints& ip = layout_.interfaces[i];
                InterfaceTapes& t = iface_tapes_[i];
                const auto a = static_cast<std::size_t>(ip.a), b = static_cast<std::size_t>(ip.b);
                t.a.forward(spec_, net_span(theta, a), ip.points, interface_degree_);
                t.b.forward(spec_, net_span(theta, b), ip.points, interface_degree_);
                t.ja = t.a.jets();
                t.jb = t.b.jets();
                if (grad) {
                    t.adj_a.setZero(t.ja.rows(), t.ja.cols());
                    t.adj_b.setZero(t.jb.rows(), t.jb.cols());
                }
                for (int slot = 0; slot < kNumConditions; ++slot) {
                    if (!action_.mask[slot]) continue;
                    const double term =
                        mult * condition_term(catalog_[slot], p, ip, t.ja, t.jb, grad ? &t.adj_a : nullptr,
                                              grad ? &t.adj_b : nullptr, weights_.lambda_i * mult);
                    require_finite(term, std::string("interface ") + catalog_[slot].name);
                    total += weights_.lambda_i * term;
                    if (parts) parts->interface[slot] += term;
                }
                if (grad) {
                    t.a.backward(t.adj_a, grad_span(*grad, a));
                    t.b.backward(t.adj_b, grad_span(*grad, b));
                }
            }
        }
        if (parts) parts->total = total;
        return total;
    }

    const PdeProblem* problem_;
    LossLayout layout_;
    MlpSpec spec_;
    LossWeights weights_;
    Action action_;
    Catalog catalog_;
    Eigen::Index per_net_;
    int interface_degree_ = 0;
    std::vector<NetTapes> tapes_;
    std::vector<InterfaceTapes> iface_tapes_;
};

// ---------------------------------------------------------------------------------------------
// Evaluation

struct TrainedModel {
    MlpSpec spec;
    std::vector<ParamVector> params;
    /// Closed region of each network.
    std::vector<std::vector<Box>> regions;

    std::size_t num_nets() const noexcept { return params.size(); }
};

inline TrainedModel make_model(const LossLayout& layout, const MlpSpec& spec, const Eigen::VectorXd& theta) {
    TrainedModel m{spec, {}, {}};
    const auto per = static_cast<Eigen::Index>(spec.param_count());
    for (std::size_t k = 0; k < layout.nets.size(); ++k) {
        m.params.push_back(theta.segment(static_cast<Eigen::Index>(k) * per, per));
        m.regions.push_back(layout.nets[k].region);
    }
    return m;
}

/// Stitched prediction at each point: the average of every network whose closed region contains
/// it. Points outside all regions evaluate to NaN.
inline Eigen::VectorXd evaluate_model(const TrainedModel& model, const Points& pts, double tol = 1e-12) {
    const Eigen::Index n = pts.rows();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n), count = Eigen::VectorXd::Zero(n);
    MlpJetTape tape;
    for (std::size_t k = 0; k < model.num_nets(); ++k) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Vec2 z{pts(i, 0), pts(i, 1)};
            for (const Box& b : model.regions[k]) {
                if (b.contains(z, tol)) {
                    rows.push_back(i);
                    break;
                }
            }
        }
        if (rows.empty()) continue;
        Points sub(static_cast<Eigen::Index>(rows.size()), 2);
        for (std::size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = pts.row(rows[r]);
        const ParamVector& th = model.params[k];
        tape.forward(model.spec, {th.data(), static_cast<std::size_t>(th.size())}, sub, 0);
        const auto u = tape.jets().col(0);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            sum[rows[r]] += u[static_cast<Eigen::Index>(r)];
            count[rows[r]] += 1.0;
        }
    }
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = count[i] > 0 ? sum[i] / count[i] : std::numeric_limits<double>::quiet_NaN();
    return out;
}

/// Grid nodes as a point list, z1 fastest.
inline Points grid_points(const GroundTruthGrid& g) {
    Points pts(g.nx() * g.ny(), 2);
    for (Eigen::Index j = 0; j < g.ny(); ++j) {
        for (Eigen::Index i = 0; i < g.nx(); ++i) {
            pts(j * g.nx() + i, 0) = g.z1[static_cast<std::size_t>(i)];
            pts(j * g.nx() + i, 1) = g.z2[static_cast<std::size_t>(j)];
        }
    }
    return pts;
}

/// Model prediction on the grid, laid out like GroundTruthGrid::values.
inline Eigen::MatrixXd predict_grid(const TrainedModel& model, const GroundTruthGrid& g) {
    const Eigen::VectorXd v = evaluate_model(model, grid_points(g));
    Eigen::MatrixXd out(g.ny(), g.nx());
    for (Eigen::Index j = 0; j < g.ny(); ++j)
        for (Eigen::Index i = 0; i < g.nx(); ++i) out(j, i) = v[j * g.nx() + i];
    return out;
}

/// ||u_hat - u||_2 / ||u||_2 over the grid.
inline double relative_l2_error(const Eigen::MatrixXd& prediction, const GroundTruthGrid& g) {
    if (prediction.rows() != g.values.rows() || prediction.cols() != g.values.cols()) {
        throw std::invalid_argument("relative_l2_error: prediction and grid shapes differ");
    }
    const double denom = g.values.norm();
    if (!(denom > 0.0)) throw NumericalError("relative_l2_error: reference solution has zero norm");
    return (prediction - g.values).norm() / denom;
}

inline double relative_l2_error(const TrainedModel& model, const GroundTruthGrid& g) {
    return relative_l2_error(predict_grid(model, g), g);
}

// ---------------------------------------------------------------------------------------------
// Two-phase training

struct TrainConfig {
    MlpSpec net{2, 2, 20, 1};
    AdamConfig adam;
    LbfgsConfig lbfgs;
    LossWeights weights;
    /// Losses above this abort a phase as diverged.
    double divergence_threshold = 1e6;
    /// Relative error recorded for failed or diverged phases.
    double error_cap = 10.0;

    void validate() const {
        net.validate();
        adam.validate();
        lbfgs.validate();
        weights.validate();
        if (!(divergence_threshold > 0.0)) throw ConfigError("train.divergence_threshold", "must be > 0");
        if (!(error_cap > 0.0)) throw ConfigError("train.error_cap", "must be > 0");
    }
};

struct PhaseOutcome {
    Eigen::VectorXd params;
    /// Training loss at the end of the phase (finite; capped at the divergence threshold).
    double loss = 0.0;
    /// Relative L2 error (capped at error_cap).
    double error = 0.0;
    int iterations = 0;
    std::string stop;
    bool failed = false;
    std::string failure;
    double wall_s = 0.0;

    /// The error in the log domain, as the bandits use it.
    double log_error() const { return std::log(error); }
};

struct TwoPhaseOutcome {
    PhaseOutcome adam;
    PhaseOutcome lbfgs;
};

namespace detail {

enum : std::uint64_t { kStreamInit = 0x1417 };

inline Eigen::VectorXd initial_params(const MlpSpec& spec, std::size_t nets, std::uint64_t seed) {
    const auto per = static_cast<Eigen::Index>(spec.param_count());
    Eigen::VectorXd theta(per * static_cast<Eigen::Index>(nets));
    for (std::size_t k = 0; k < nets; ++k) {
        theta.segment(static_cast<Eigen::Index>(k) * per, per) = init_params(spec, stream_seed(seed, {kStreamInit, k}));
    }
    return theta;
}

inline void score(PhaseOutcome& o, const LossLayout& layout, const MlpSpec& spec, const GroundTruthGrid& gt,
                  const TrainConfig& cfg) {
    if (!std::isfinite(o.loss) || o.loss > cfg.divergence_threshold) {
        o.loss = cfg.divergence_threshold;
        if (!o.failed) {
            o.failed = true;
            o.failure = "diverged";
        }
    }
    if (o.failed) {
        o.error = cfg.error_cap;
        return;
    }
    const double e = relative_l2_error(make_model(layout, spec, o.params), gt);
    o.error = std::isfinite(e) ? std::min(e, cfg.error_cap) : cfg.error_cap;
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace detail

/// Callback between phases: receives the ADAM outcome and returns the L-BFGS action.
using PhaseTwoChooser = std::function<Action(const PhaseOutcome&)>;

/// ADAM from a fresh initialization with `action_adam`, then L-BFGS from the ADAM parameters
/// with the action returned by `choose_lbfgs`. A failed ADAM phase skips L-BFGS and its outcome
/// is copied into the second phase.
inline TwoPhaseOutcome train_two_phase(const PdeProblem& problem, const LossLayout& layout, const Action& action_adam,
                                       const PhaseTwoChooser& choose_lbfgs, const TrainConfig& cfg,
                                       const GroundTruthGrid& gt, std::uint64_t seed) {
    cfg.validate();
    TwoPhaseOutcome out;
    const Eigen::VectorXd theta0 = detail::initial_params(cfg.net, layout.nets.size(), seed);

    auto t0 = detail::Clock::now();
    {
        MultiDomainLoss loss(problem, layout, cfg.net, cfg.weights, action_adam);
        AdamConfig ac = cfg.adam;
        ac.divergence_threshold = std::min(ac.divergence_threshold, cfg.divergence_threshold);
        PhaseOutcome& o = out.adam;
        try {
            OptimResult r = adam_run(loss.objective(), theta0, ac, seed);
            o.params = std::move(r.params);
            o.loss = r.loss;
            o.iterations = r.iterations;
            o.stop = to_string(r.reason);
            if (r.reason == StopReason::diverged) {
                o.failed = true;
                o.failure = "diverged";
            }
        } catch (const NumericalError& e) {
            o.params = theta0;
            o.loss = std::numeric_limits<double>::infinity();
            o.failed = true;
            o.failure = e.what();
            o.stop = "error";
        }
        detail::score(o, layout, cfg.net, gt, cfg);
        o.wall_s = detail::seconds_since(t0);
    }

    if (out.adam.failed) {
        out.lbfgs = out.adam;
        out.lbfgs.wall_s = 0.0;
        return out;
    }
    const Action action_lbfgs = choose_lbfgs(out.adam);
    t0 = detail::Clock::now();
    {
        MultiDomainLoss loss(problem, layout, cfg.net, cfg.weights, action_lbfgs);
        LbfgsConfig lc = cfg.lbfgs;
        lc.divergence_threshold = std::min(lc.divergence_threshold, cfg.divergence_threshold);
        PhaseOutcome& o = out.lbfgs;
        try {
            OptimResult r = lbfgs_run(loss.objective(), out.adam.params, lc);
            o.params = std::move(r.params);
            o.loss = r.loss;
            o.iterations = r.iterations;
            o.stop = to_string(r.reason);
            if (r.reason == StopReason::diverged) {
                o.failed = true;
                o.failure = "diverged";
            }
        } catch (const NumericalError& e) {
            o.params = out.adam.params;
            o.loss = std::numeric_limits<double>::infinity();
            o.failed = true;
            o.failure = e.what();
            o.stop = "error";
        }
        detail::score(o, layout, cfg.net, gt, cfg);
        o.wall_s = detail::seconds_since(t0);
    }
    return out;
}

inline TwoPhaseOutcome train_two_phase(const PdeProblem& problem, const LossLayout& layout, const Action& action_adam,
                                       const Action& action_lbfgs, const TrainConfig& cfg, const GroundTruthGrid& gt,
                                       std::uint64_t seed) {
    return train_two_phase(problem, layout, action_adam, [&](const PhaseOutcome&) { return action_lbfgs; }, cfg, gt,
                           seed);
}

// ---------------------------------------------------------------------------------------------
// Single-network baselines

enum class Baseline { pinn_sub, merge_h, merge_v };

inline const char* to_string(Baseline b) {
    switch (b) {
    case Baseline::pinn_sub: return "pinn_sub";
    case Baseline::merge_h: return "merge_h";
    case Baseline::merge_v: return "merge_v";
    }
    return "unknown";
}

inline Baseline baseline_from_string(std::string_view s) {
    if (s == "pinn_sub") return Baseline::pinn_sub;
    if (s == "merge_h") return Baseline::merge_h;
    if (s == "merge_v") return Baseline::merge_v;
    throw ConfigError("baseline", "unknown baseline '" + std::string(s) + "'");
}

/// pinn_sub: the subdomain architecture; merge_h: twice as wide; merge_v: twice as deep.
inline MlpSpec baseline_spec(Baseline b, const MlpSpec& sub = {2, 2, 20, 1}) {
    MlpSpec s = sub;
    if (b == Baseline::merge_h) s.width *= 2;
    if (b == Baseline::merge_v) s.hidden_layers *= 2;
    return s;
}

inline TwoPhaseOutcome train_baseline(const PdeProblem& problem, const PointSets& points, Baseline b,
                                      const TrainConfig& cfg, const GroundTruthGrid& gt, std::uint64_t seed) {
    TrainConfig c = cfg;
    c.net = baseline_spec(b, cfg.net);
    return train_two_phase(problem, merged_layout(problem, points), Action{}, Action{}, c, gt, seed);
}

// ---------------------------------------------------------------------------------------------
// Run records

struct RunRecord {
    Family family = Family::poisson;
    double param = 0.0;
    int action_adam = 0;
    int action_lbfgs = 0;
    std::uint64_t seed = 0;
    double loss_adam = 0.0;
    double err_adam = 0.0;
    double loss_lbfgs = 0.0;
    double err_lbfgs = 0.0;
    double wall_s = 0.0;
};

inline RunRecord make_run_record(const PdeProblem& p, int a1, int a2, std::uint64_t seed, const TwoPhaseOutcome& o) {
    return {p.family, p.param, a1, a2, seed, o.adam.loss, o.adam.error, o.lbfgs.loss, o.lbfgs.error,
            o.adam.wall_s + o.lbfgs.wall_s};
}

inline const std::vector<std::string>& run_record_header() {
    static const std::vector<std::string> h{"family",   "param",      "action_adam_idx", "action_lbfgs_idx",
                                            "seed",     "loss_adam",  "err_adam",        "loss_lbfgs",
                                            "err_lbfgs", "wall_s"};
    return h;
}

inline void write_run_records(std::ostream& os, const std::vector<RunRecord>& rows) {
    CsvWriter w(os, run_record_header());
    for (const RunRecord& r : rows) {
        w << to_string(r.family) << r.param << r.action_adam << r.action_lbfgs << static_cast<unsigned long long>(r.seed)
          << r.loss_adam << r.err_adam << r.loss_lbfgs << r.err_lbfgs << r.wall_s;
        w.end_row();
    }
}

}  // namespace metalic
