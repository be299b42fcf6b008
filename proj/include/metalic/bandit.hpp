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

/// Contextual bandits over the 512 interface masks.
///
/// Single mode learns one surrogate on context [beta] with reward -ln(err). Sequential mode
/// learns one surrogate per training phase:
///   D1 <- ([a1, beta], -ln s1 - gamma ln s2)
///   D2 <- ([a2, beta, ln l], -ln s2)
/// where l is the total loss after the first phase. Contexts are stored raw; beta is mapped to
/// [0, 1] by the family range and ln l is standardized by its dataset column at each refit.

#include "metalic/csv.hpp"
#include "metalic/error.hpp"
#include "metalic/gp.hpp"
#include "metalic/interface.hpp"
#include "metalic/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace metalic {

enum class Scorer { ucb, ts };

inline std::string to_string(Scorer s) { return s == Scorer::ucb ? "ucb" : "ts"; }

inline Scorer scorer_from_string(const std::string& s) {
    if (s == "ucb") return Scorer::ucb;
    if (s == "ts") return Scorer::ts;
    throw ConfigError("scorer", "expected ucb or ts, got '" + s + "'");
}

/// Which selection rule drives the plays.
enum class Policy { metalic_single, metalic_seq, random_single, random_seq };

inline std::string to_string(Policy p) {
    switch (p) {
        case Policy::metalic_single: return "metalic_single";
        case Policy::metalic_seq: return "metalic_seq";
        case Policy::random_single: return "random_single";
        case Policy::random_seq: return "random_seq";
    }
    return "?";
}

inline Policy policy_from_string(const std::string& s) {
    for (Policy p : {Policy::metalic_single, Policy::metalic_seq, Policy::random_single, Policy::random_seq}) {
        if (to_string(p) == s) return p;
    }
    throw ConfigError("policy", "unknown policy '" + s + "'");
}

inline bool is_sequential(Policy p) { return p == Policy::metalic_seq || p == Policy::random_seq; }
inline bool is_random(Policy p) { return p == Policy::random_single || p == Policy::random_seq; }

struct BanditConfig {
    int plays = 200;
    double ucb_c = 1.0;
    double gamma = 0.9;
    Scorer scorer = Scorer::ucb;
    std::uint64_t seed = 0;
    int warmup_plays = 5;
    /// Hyperparameters are re-optimized whenever the dataset size is a multiple of this.
    int hyper_every = 10;
    KernelParams kernel{};
    HyperSearch search{};
    /// Error and loss recorded for a play whose trainer failed.
    double error_cap = 10.0;
    double loss_cap = 1e6;

    void validate() const {
        if (plays < 0) throw ConfigError("bandit.plays", "must be >= 0");
        if (!(ucb_c >= 0.0)) throw ConfigError("bandit.ucb_c", "must be >= 0");
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("bandit.gamma", "must lie in [0, 1]");
        if (warmup_plays < 0) throw ConfigError("bandit.warmup_plays", "must be >= 0");
        if (hyper_every < 1) throw ConfigError("bandit.hyper_every", "must be >= 1");
        if (!(error_cap > 0.0)) throw ConfigError("bandit.error_cap", "must be > 0");
        if (!(loss_cap > 0.0)) throw ConfigError("bandit.loss_cap", "must be > 0");
        kernel.validate();
    }
};

inline double ucb_score(double mean, double stddev, double c) { return mean + c * stddev; }

inline double ts_score(double mean, double stddev, std::mt19937_64& rng) {
    return mean + stddev * standard_normal(rng);
}

/// Smallest error or loss fed to a logarithm.
constexpr double kLogFloor = 1e-300;

inline double log_error(double err) { return std::log(std::max(err, kLogFloor)); }

/// D1 reward in whatever units s1, s2 are given: -s1 - gamma * s2.
inline double discounted_reward(double s1, double s2, double gamma) { return -s1 - gamma * s2; }

struct Selection {
    Action action{};
    double mean = 0.0;
    double stddev = 0.0;
    double score = 0.0;
    bool random = false;
};

/// Argmax of the scores over all 512 masks; exact ties are broken uniformly with `rng`.
inline Selection select_from_predictions(const std::vector<GpPrediction>& preds, Scorer scorer, double c,
                                         std::mt19937_64& rng) {
    std::vector<double> scores(preds.size());
    for (std::size_t a = 0; a < preds.size(); ++a) {
        const double sd = preds[a].stddev();
        scores[a] = scorer == Scorer::ucb ? ucb_score(preds[a].mean, sd, c) : ts_score(preds[a].mean, sd, rng);
    }
    const double best = *std::max_element(scores.begin(), scores.end());
    std::vector<int> ties;
    for (std::size_t a = 0; a < scores.size(); ++a) {
        if (scores[a] == best) ties.push_back(static_cast<int>(a));
    }
    const int pick = ties.size() == 1 ? ties[0] : ties[uniform_index(rng, ties.size())];
    return {action_from_index(pick), preds[pick].mean, preds[pick].stddev(), best, false};
}

inline Selection random_selection(std::mt19937_64& rng) {
    Selection s;
    s.action = action_from_index(static_cast<int>(uniform_index(rng, kNumActions)));
    s.random = true;
    return s;
}

/// A dataset of raw contexts and the posterior fitted to its normalized form.
class Surrogate {
public:
    /// `range` maps context column 0 affinely to [0, 1]; columns listed in `standardized` are
    /// centered and scaled by their dataset mean and standard deviation.
    Surrogate(int context_dim, std::pair<double, double> range, std::vector<int> standardized,
              KernelParams kernel = {}, HyperSearch search = {}, int hyper_every = 10)
        : raw_(context_dim), range_(range), standardized_(std::move(standardized)), kernel_(kernel),
          defaults_(kernel), search_(search), hyper_every_(hyper_every) {
        if (!(range.second > range.first)) throw std::invalid_argument("Surrogate: empty context range");
        shift_.assign(static_cast<std::size_t>(context_dim), 0.0);
        scale_.assign(static_cast<std::size_t>(context_dim), 1.0);
        refit(false);
    }

    /// Append one observation and refit; hyperparameters are re-optimized on schedule.
    void add(std::span<const double> raw_context, const Action& a, double reward) {
        raw_.add(raw_context, a, reward);
        refit(raw_.size() % static_cast<std::size_t>(hyper_every_) == 0);
    }

    /// Replace the data wholesale (resume) and refit with hyperparameter search.
    void reset(const RewardDataset& raw) {
        if (raw.context_dim() != raw_.context_dim()) throw SchemaError("Surrogate: dataset context dimension mismatch");
        raw_ = raw;
        refit(true);
    }

    std::vector<double> normalize(std::span<const double> raw_context) const {
        std::vector<double> out(raw_context.begin(), raw_context.end());
        out[0] = (out[0] - range_.first) / (range_.second - range_.first);
        for (int c : standardized_) out[c] = (out[c] - shift_[c]) / scale_[c];
        return out;
    }

    std::vector<GpPrediction> predict_all(std::span<const double> raw_context) const {
        return posterior_.predict_all(normalize(raw_context));
    }

    Selection select(std::span<const double> raw_context, Scorer scorer, double c, std::mt19937_64& rng) const {
        return select_from_predictions(predict_all(raw_context), scorer, c, rng);
    }

    const RewardDataset& data() const noexcept { return raw_; }
    const GpPosterior& posterior() const noexcept { return posterior_; }
    const KernelParams& kernel() const noexcept { return kernel_; }

private:
    void refit(bool reoptimize) {
        for (int c : standardized_) {
            const std::size_t n = raw_.size();
            double mean = 0.0, sq = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += raw_.context(i)[c];
            mean = n > 0 ? mean / static_cast<double>(n) : 0.0;
            for (std::size_t i = 0; i < n; ++i) sq += (raw_.context(i)[c] - mean) * (raw_.context(i)[c] - mean);
            const double sd = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1)) : 0.0;
            shift_[c] = mean;
            scale_[c] = sd > 1e-12 ? sd : 1.0;
        }
        RewardDataset norm(raw_.context_dim());
        for (std::size_t i = 0; i < raw_.size(); ++i) {
            norm.add(normalize(raw_.context(i)), action_from_index(raw_.action(i)), raw_.reward(i));
        }
        if (reoptimize) kernel_ = optimize_hypers(norm, search_, defaults_);
        posterior_ = gp_fit(norm, kernel_);
    }

    RewardDataset raw_;
    std::pair<double, double> range_;
    std::vector<int> standardized_;
    std::vector<double> shift_, scale_;
    KernelParams kernel_, defaults_;
    HyperSearch search_;
    int hyper_every_;
    GpPosterior posterior_;
};

/// Argmax of the predictive mean only.
inline Action offline_select(const Surrogate& s, std::span<const double> raw_context) {
    if (!s.posterior().fitted()) throw std::logic_error("offline_select: unfitted posterior");
    const auto preds = s.predict_all(raw_context);
    int best = 0;
    for (int a = 1; a < kNumActions; ++a) {
        if (preds[a].mean > preds[best].mean) best = a;
    }
    return action_from_index(best);
}

// ---------------------------------------------------------------------------------------------
// Play loop

/// What the first phase reports to the chooser of the second-phase action.
struct PhaseOneView {
    double loss = 0.0;
    double error = 0.0;
};

using SecondChooser = std::function<Action(const PhaseOneView&)>;

struct TrialRequest {
    int play = 0;
    double beta = 0.0;
    std::uint64_t seed = 0;
};

struct TrialResult {
    double loss_adam = 0.0;
    double err_adam = 0.0;
    double err_lbfgs = 0.0;
    Action action_lbfgs{};
    double wall_s = 0.0;
    bool failed = false;
};

/// Trains with `a1` for the first phase and asks `choose` for the second-phase action.
using TrialFn = std::function<TrialResult(const TrialRequest&, const Action& a1, const SecondChooser& choose)>;

struct PlayRecord {
    int play = 0;
    double beta = 0.0;
    Action action1{}, action2{};
    double loss_adam = 0.0;
    double err_adam = 0.0;
    double err_lbfgs = 0.0;
    double reward1 = 0.0;
    /// NaN in single mode.
    double reward2 = std::numeric_limits<double>::quiet_NaN();
    std::string scorer;
    double wall_s = 0.0;
    /// Surrogate diagnostics at the chosen arms.
    double mean1 = 0.0, stddev1 = 0.0, mean2 = 0.0, stddev2 = 0.0;
    bool failed = false;
};

struct BanditRun {
    Surrogate first;
    std::optional<Surrogate> second;
    std::vector<PlayRecord> plays;
};

inline Surrogate make_first_surrogate(std::pair<double, double> range, const BanditConfig& cfg) {
    return Surrogate(1, range, {}, cfg.kernel, cfg.search, cfg.hyper_every);
}

inline Surrogate make_second_surrogate(std::pair<double, double> range, const BanditConfig& cfg) {
    return Surrogate(2, range, {1}, cfg.kernel, cfg.search, cfg.hyper_every);
}

namespace detail {

inline TrialResult guarded_trial(const TrialFn& trial, const TrialRequest& req, const Action& a1,
                                 const SecondChooser& choose, const BanditConfig& cfg) {
    TrialResult r;
    try {
        r = trial(req, a1, choose);
    } catch (const NumericalError&) {
        r = TrialResult{};
        r.failed = true;
        r.action_lbfgs = a1;
    }
    auto fix = [&](double& v, double cap) {
        if (!std::isfinite(v) || v > cap) {
            v = cap;
            r.failed = true;
        }
    };
    if (r.failed) {
        r.loss_adam = std::isfinite(r.loss_adam) && r.loss_adam > 0.0 ? std::min(r.loss_adam, cfg.loss_cap) : cfg.loss_cap;
        if (!(r.err_adam > 0.0)) r.err_adam = cfg.error_cap;
        if (!(r.err_lbfgs > 0.0)) r.err_lbfgs = cfg.error_cap;
    }
    fix(r.loss_adam, cfg.loss_cap);
    fix(r.err_adam, cfg.error_cap);
    fix(r.err_lbfgs, cfg.error_cap);
    return r;
}

}  // namespace detail

/// Runs `cfg.plays` online plays. Every play appends exactly one row to each surrogate.
inline BanditRun run_bandit(Policy policy, const TrialFn& trial, std::pair<double, double> beta_range,
                            const BanditConfig& cfg) {
    cfg.validate();
    BanditRun run{make_first_surrogate(beta_range, cfg), std::nullopt, {}};
    const bool seq = is_sequential(policy);
    if (seq) run.second = make_second_surrogate(beta_range, cfg);
    auto beta_rng = make_stream(cfg.seed, {0xBE7A});
    for (int t = 0; t < cfg.plays; ++t) {
        const double beta = uniform(beta_rng, beta_range.first, beta_range.second);
        auto select_rng = make_stream(cfg.seed, {0x5E1, static_cast<std::uint64_t>(t)});
        const bool explore = is_random(policy) || t < cfg.warmup_plays;
        const std::vector<double> ctx1{beta};
        const Selection s1 = explore ? random_selection(select_rng) : run.first.select(ctx1, cfg.scorer, cfg.ucb_c, select_rng);
        Selection s2 = s1;
        bool chose_second = false;
        auto choose_second = [&](double loss) {
            const std::vector<double> ctx2{beta, log_error(loss)};
            s2 = explore ? random_selection(select_rng) : run.second->select(ctx2, cfg.scorer, cfg.ucb_c, select_rng);
            chose_second = true;
        };
        SecondChooser choose = [&](const PhaseOneView& v) {
            if (!seq) return s1.action;
            choose_second(v.loss);
            return s2.action;
        };
        const TrialRequest req{t, beta, stream_seed(cfg.seed, {0x7A1, static_cast<std::uint64_t>(t)})};
        const TrialResult r = detail::guarded_trial(trial, req, s1.action, choose, cfg);

        PlayRecord rec;
        rec.play = t;
        rec.beta = beta;
        rec.action1 = s1.action;
        rec.action2 = seq ? s2.action : s1.action;
        rec.loss_adam = r.loss_adam;
        rec.err_adam = r.err_adam;
        rec.err_lbfgs = r.err_lbfgs;
        rec.scorer = is_random(policy) ? "random" : to_string(cfg.scorer);
        rec.wall_s = r.wall_s;
        rec.mean1 = s1.mean;
        rec.stddev1 = s1.stddev;
        rec.failed = r.failed;
        if (seq) {
            // A first phase that failed never reached the chooser; D2 still gets one row.
            if (!chose_second) choose_second(r.loss_adam);
            rec.action2 = s2.action;
            const double ls1 = log_error(r.err_adam), ls2 = log_error(r.err_lbfgs);
            rec.reward1 = discounted_reward(ls1, ls2, cfg.gamma);
            rec.reward2 = -ls2;
            rec.mean2 = s2.mean;
            rec.stddev2 = s2.stddev;
            run.first.add(ctx1, rec.action1, rec.reward1);
            const std::vector<double> ctx2{beta, log_error(r.loss_adam)};
            run.second->add(ctx2, rec.action2, rec.reward2);
        } else {
            rec.reward1 = -log_error(r.err_lbfgs);
            run.first.add(ctx1, rec.action1, rec.reward1);
        }
        run.plays.push_back(rec);
    }
    return run;
}

inline BanditRun metalic_single(const TrialFn& trial, const BanditConfig& cfg, std::pair<double, double> range) {
    return run_bandit(Policy::metalic_single, trial, range, cfg);
}

inline BanditRun metalic_seq(const TrialFn& trial, const BanditConfig& cfg, std::pair<double, double> range) {
    return run_bandit(Policy::metalic_seq, trial, range, cfg);
}

/// Cumulative sum of the final errors, one entry per play.
inline std::vector<double> accumulated_error(const std::vector<PlayRecord>& plays) {
    std::vector<double> out;
    double acc = 0.0;
    for (const auto& p : plays) out.push_back(acc += p.err_lbfgs);
    return out;
}

inline std::vector<std::string> play_log_header() {
    return {"play",     "beta",      "action1_idx", "action2_idx", "loss_adam", "err_adam",
            "err_lbfgs", "reward1", "reward2",     "scorer",      "wall_s"};
}

inline void write_play_log(const std::vector<PlayRecord>& plays, std::ostream& os) {
    CsvWriter w(os, play_log_header());
    for (const auto& p : plays) {
        w << p.play << p.beta << action_index(p.action1) << action_index(p.action2) << p.loss_adam << p.err_adam
          << p.err_lbfgs << p.reward1;
        if (std::isnan(p.reward2)) {
            w << std::string{};
        } else {
            w << p.reward2;
        }
        w << p.scorer << p.wall_s;
        w.end_row();
    }
}

}  // namespace metalic
