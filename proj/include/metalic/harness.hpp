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

/// Experiment orchestration behind the command-line tool.
///
/// Every command writes into the configured output directory. Files other than config.json are
/// versioned CSV or SVG, and rerunning a command with the same config reproduces them byte for
/// byte apart from the wall_s columns.
///
///   online   config.json, metalic_play_log.csv, random_play_log.csv, dataset_d1.csv,
///            dataset_d2.csv (seq mode), accumulated_error.csv, accumulated_error.svg
///   offline  offline_runs.csv, offline_report.csv
///   solve    solve_run.csv, solve_solution.csv, solve_truth.csv, solve_error.csv
///   report   report_table.csv, report_curves.csv, report_curves.svg
///   gt       gt.csv

#include "metalic/bandit.hpp"
#include "metalic/config.hpp"
#include "metalic/csv.hpp"
#include "metalic/ground_truth.hpp"
#include "metalic/plot.hpp"
#include "metalic/pool.hpp"
#include "metalic/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace metalic {

/// Thread-safe progress lines; a null stream discards them.
class Progress {
public:
    explicit Progress(std::ostream* os = nullptr) : os_(os) {}

    template <typename... Args>
    void line(const Args&... args) {
        if (!os_) return;
        std::lock_guard<std::mutex> lock(mutex_);
        ((*os_ << args), ...);
        *os_ << std::endl;
    }

private:
    std::ostream* os_;
    std::mutex mutex_;
};

inline std::filesystem::path out_path(const ExperimentConfig& cfg, const std::string& name) {
    return std::filesystem::path(cfg.out) / name;
}

inline void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    body(os);
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------------------------
// One training run

inline PdeProblem make_instance(const ExperimentConfig& cfg, double param) {
    return make_problem(cfg.family, param, cfg.poisson_variant, cfg.param_range());
}

inline PointSets instance_points(const ExperimentConfig& cfg, const PdeProblem& p, std::uint64_t seed) {
    SamplingConfig sc = cfg.sampling;
    sc.seed = seed;
    return sample_points(p, sc);
}

inline GroundTruthGrid instance_truth(const ExperimentConfig& cfg, const PdeProblem& p) {
    return cached_ground_truth(p, cfg.gt_cache, cfg.ground_truth);
}

/// Trial callback for the bandit loop: samples points and initializes from the play's seed.
inline TrialFn make_pinn_trial(const ExperimentConfig& cfg, Progress& progress, std::string label) {
    return [&cfg, &progress, label](const TrialRequest& req, const Action& a1, const SecondChooser& choose) {
        const PdeProblem p = make_instance(cfg, req.beta);
        const LossLayout layout = multi_domain_layout(p, instance_points(cfg, p, req.seed));
        const GroundTruthGrid gt = instance_truth(cfg, p);
        Action a2 = a1;
        const TwoPhaseOutcome o = train_two_phase(
            p, layout, a1,
            [&](const PhaseOutcome& ph) {
                a2 = choose(PhaseOneView{ph.loss, ph.error});
                return a2;
            },
            cfg.train, gt, req.seed);
        TrialResult r;
        r.loss_adam = o.adam.loss;
        r.err_adam = o.adam.error;
        r.err_lbfgs = o.lbfgs.error;
        r.action_lbfgs = a2;
        r.wall_s = o.adam.wall_s + o.lbfgs.wall_s;
        r.failed = o.adam.failed || o.lbfgs.failed;
        progress.line(label, " play ", req.play + 1, "/", cfg.bandit.plays, " param ", req.beta, " a1 ",
                      action_index(a1), " a2 ", action_index(a2), " err ", r.err_lbfgs, r.failed ? " (failed)" : "");
        return r;
    };
}

// ---------------------------------------------------------------------------------------------
// Online

struct OnlineResult {
    BanditRun metalic;
    BanditRun random;
};

/// Play index 0 .. T: accumulated error and accumulated log-error of both arms.
inline void write_curve_csv(std::ostream& os, const std::vector<PlayRecord>& metalic,
                            const std::vector<PlayRecord>& random) {
    CsvWriter w(os, {"play", "metalic_acc_err", "random_acc_err", "metalic_acc_log_err", "random_acc_log_err"});
    double m = 0.0, r = 0.0, ml = 0.0, rl = 0.0;
    w << 0 << m << r << ml << rl;
    w.end_row();
    for (std::size_t t = 0; t < metalic.size(); ++t) {
        m += metalic[t].err_lbfgs;
        r += random[t].err_lbfgs;
        ml += log_error(metalic[t].err_lbfgs);
        rl += log_error(random[t].err_lbfgs);
        w << static_cast<int>(t + 1) << m << r << ml << rl;
        w.end_row();
    }
}

inline void write_curve_svg(std::ostream& os, const CsvTable& curve, const std::string& title) {
    std::vector<Series> s{{"METALIC", {}}, {"Random", {}}};
    for (std::size_t i = 0; i < curve.rows.size(); ++i) {
        s[0].values.push_back(curve.real(i, "metalic_acc_err"));
        s[1].values.push_back(curve.real(i, "random_acc_err"));
    }
    write_line_svg(os, title, "play", "accumulated relative L2 error", s);
}

inline void write_config_file(const ExperimentConfig& cfg) {
    write_file(out_path(cfg, "config.json"), [&](std::ostream& os) { os << to_json(cfg).dump(2) << '\n'; });
}

/// METALIC and the Random baseline on the same seed, hence the same parameter stream and the same
/// per-play trainer seeds. The two arms run concurrently when jobs > 1.
inline OnlineResult cmd_online(const ExperimentConfig& cfg, Progress& progress) {
    cfg.validate();
    const ParamRange pr = cfg.param_range();
    const std::pair<double, double> range{pr.lo, pr.hi};
    const BanditConfig bc = cfg.bandit_config();
    const Policy policies[2] = {cfg.sequential ? Policy::metalic_seq : Policy::metalic_single,
                                cfg.sequential ? Policy::random_seq : Policy::random_single};
    std::optional<BanditRun> runs[2];
    parallel_for(2, cfg.jobs, [&](std::size_t k) {
        runs[k] = run_bandit(policies[k], make_pinn_trial(cfg, progress, to_string(policies[k])), range, bc);
    });
    OnlineResult res{std::move(*runs[0]), std::move(*runs[1])};

    write_config_file(cfg);
    write_file(out_path(cfg, "metalic_play_log.csv"), [&](std::ostream& os) { write_play_log(res.metalic.plays, os); });
    write_file(out_path(cfg, "random_play_log.csv"), [&](std::ostream& os) { write_play_log(res.random.plays, os); });
    write_file(out_path(cfg, "dataset_d1.csv"), [&](std::ostream& os) { write_dataset_csv(res.metalic.first.data(), os); });
    if (res.metalic.second) {
        write_file(out_path(cfg, "dataset_d2.csv"),
                   [&](std::ostream& os) { write_dataset_csv(res.metalic.second->data(), os); });
    }
    std::ostringstream curve;
    write_curve_csv(curve, res.metalic.plays, res.random.plays);
    write_file(out_path(cfg, "accumulated_error.csv"), [&](std::ostream& os) { os << curve.str(); });
    if (cfg.svg) {
        std::istringstream in(curve.str());
        const CsvTable t = read_csv(in, "accumulated_error.csv");
        write_file(out_path(cfg, "accumulated_error.svg"), [&](std::ostream& os) {
            write_curve_svg(os, t, std::string(to_string(cfg.family)) + ": " + to_string(policies[0]) + " vs Random");
        });
    }
    return res;
}

// ---------------------------------------------------------------------------------------------
// Report rows

struct ReportRow {
    std::string family;
    std::string method;
    double mean = 0.0;
    /// Sample standard deviation; 0 for a single run.
    double stddev = 0.0;
    int n = 0;
};

struct ErrorSample {
    std::string family;
    std::string method;
    double error = 0.0;
};

/// Mean and sample standard deviation per (family, method), in first-appearance order.
inline std::vector<ReportRow> aggregate(const std::vector<ErrorSample>& samples) {
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
    for (const auto& s : samples) {
        auto key = std::make_pair(s.family, s.method);
        auto [it, fresh] = groups.try_emplace(key);
        if (fresh) order.push_back(key);
        it->second.push_back(s.error);
    }
    std::vector<ReportRow> rows;
    for (const auto& key : order) {
        const auto& v = groups[key];
        const double n = static_cast<double>(v.size());
        double mean = 0.0;
        for (double e : v) mean += e;
        mean /= n;
        double sq = 0.0;
        for (double e : v) sq += (e - mean) * (e - mean);
        const double sd = v.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
        rows.push_back({key.first, key.second, mean, sd, static_cast<int>(v.size())});
    }
    return rows;
}

inline void write_report_rows(std::ostream& os, const std::vector<ReportRow>& rows) {
    CsvWriter w(os, {"family", "method", "mean_rel_l2", "std_rel_l2", "n"});
    for (const auto& r : rows) {
        w << r.family << r.method << r.mean << r.stddev << r.n;
        w.end_row();
    }
}

// ---------------------------------------------------------------------------------------------
// Offline

namespace detail {
enum : std::uint64_t { kStreamOfflineParam = 0x0FF1, kStreamOfflineSeed = 0x0FF7, kStreamOfflineAction = 0x0FFA };
}

struct OfflineRun {
    std::string method;
    int test = 0;
    double param = 0.0;
    std::uint64_t seed = 0;
    int action_adam = 0;
    int action_lbfgs = 0;
    double loss_adam = 0.0;
    double err_adam = 0.0;
    double loss_lbfgs = 0.0;
    double err_lbfgs = 0.0;
    bool failed = false;
    double wall_s = 0.0;
};

struct OfflineResult {
    std::vector<double> params;
    std::vector<OfflineRun> runs;
    std::vector<ReportRow> report;
};

inline void write_offline_runs(std::ostream& os, Family family, const std::vector<OfflineRun>& runs) {
    CsvWriter w(os, {"family", "method", "test", "param", "seed", "action_adam_idx", "action_lbfgs_idx", "loss_adam",
                     "err_adam", "loss_lbfgs", "err_lbfgs", "failed", "wall_s"});
    for (const auto& r : runs) {
        w << to_string(family) << r.method << r.test << r.param << static_cast<unsigned long long>(r.seed)
          << r.action_adam << r.action_lbfgs << r.loss_adam << r.err_adam << r.loss_lbfgs << r.err_lbfgs
          << (r.failed ? 1 : 0) << r.wall_s;
        w.end_row();
    }
}

inline RewardDataset read_dataset_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw ConfigError("offline", "missing " + path.string() + "; run `metalic online` with this config first");
    }
    std::ifstream in(path);
    return read_dataset_csv(in, path.string());
}

/// Test parameters from a stream disjoint from the online one; values present in the training
/// data are redrawn.
inline std::vector<double> offline_params(const ExperimentConfig& cfg, const RewardDataset& train) {
    std::set<double> seen;
    for (std::size_t i = 0; i < train.size(); ++i) seen.insert(train.context(i)[0]);
    const ParamRange r = cfg.param_range();
    auto rng = make_stream(cfg.seed, {detail::kStreamOfflineParam});
    std::vector<double> out;
    while (static_cast<int>(out.size()) < cfg.offline.n_test) {
        const double v = uniform(rng, r.lo, r.hi);
        if (!seen.count(v)) out.push_back(v);
    }
    return out;
}

/// Methods evaluated offline, in output order.
inline std::vector<std::string> offline_methods(const ExperimentConfig& cfg) {
    std::vector<std::string> m{cfg.sequential ? "metalic_seq" : "metalic_single"};
    if (cfg.offline.random_baselines) {
        m.push_back("random_single");
        m.push_back("random_seq");
    }
    for (Baseline b : cfg.offline.baselines) m.push_back(to_string(b));
    return m;
}

/// Predictive-mean selection on the persisted datasets for fresh parameters, plus baselines.
/// All methods of one test share the problem, the training points and the initialization seed.
inline OfflineResult cmd_offline(const ExperimentConfig& cfg, Progress& progress) {
    cfg.validate();
    const ParamRange pr = cfg.param_range();
    const std::pair<double, double> range{pr.lo, pr.hi};
    const BanditConfig bc = cfg.bandit_config();
    Surrogate first = make_first_surrogate(range, bc);
    first.reset(read_dataset_file(out_path(cfg, "dataset_d1.csv")));
    std::optional<Surrogate> second;
    if (cfg.sequential) {
        second = make_second_surrogate(range, bc);
        second->reset(read_dataset_file(out_path(cfg, "dataset_d2.csv")));
    }

    OfflineResult res;
    res.params = offline_params(cfg, first.data());
    const std::size_t n = res.params.size();
    std::vector<std::optional<PdeProblem>> problems(n);
    std::vector<std::optional<GroundTruthGrid>> truths(n);
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        problems[i] = make_instance(cfg, res.params[i]);
        truths[i] = instance_truth(cfg, *problems[i]);
    });

    const std::vector<std::string> methods = offline_methods(cfg);
    res.runs.resize(n * methods.size());
    parallel_for(res.runs.size(), cfg.jobs, [&](std::size_t k) {
        const std::size_t i = k / methods.size();
        const std::string& method = methods[k % methods.size()];
        const PdeProblem& p = *problems[i];
        const GroundTruthGrid& gt = *truths[i];
        const std::uint64_t seed = stream_seed(cfg.seed, {detail::kStreamOfflineSeed, i});
        const PointSets points = instance_points(cfg, p, seed);
        auto arng = make_stream(cfg.seed, {detail::kStreamOfflineAction, i});
        const Action r1 = action_from_index(static_cast<int>(uniform_index(arng, kNumActions)));
        const Action r2 = action_from_index(static_cast<int>(uniform_index(arng, kNumActions)));

        const std::vector<double> ctx1{p.param};
        Action a1{}, a2{};
        TwoPhaseOutcome o;
        if (method == "metalic_single" || method == "metalic_seq") {
            a1 = a2 = offline_select(first, ctx1);
            o = train_two_phase(
                p, multi_domain_layout(p, points), a1,
                [&](const PhaseOutcome& ph) {
                    if (second) {
                        const std::vector<double> ctx2{p.param, log_error(ph.loss)};
                        a2 = offline_select(*second, ctx2);
                    }
                    return a2;
                },
                cfg.train, gt, seed);
        } else if (method == "random_single" || method == "random_seq") {
            a1 = r1;
            a2 = method == "random_seq" ? r2 : r1;
            o = train_two_phase(p, multi_domain_layout(p, points), a1, a2, cfg.train, gt, seed);
        } else {
            o = train_baseline(p, points, baseline_from_string(method), cfg.train, gt, seed);
        }
        res.runs[k] = {method,         static_cast<int>(i), p.param,    seed,
                       action_index(a1), action_index(a2),   o.adam.loss, o.adam.error,
                       o.lbfgs.loss,   o.lbfgs.error,       o.adam.failed || o.lbfgs.failed,
                       o.adam.wall_s + o.lbfgs.wall_s};
        progress.line("offline test ", i + 1, "/", n, " ", method, " param ", p.param, " err ", o.lbfgs.error);
    });

    std::vector<ErrorSample> samples;
    for (const auto& r : res.runs) samples.push_back({to_string(cfg.family), r.method, r.err_lbfgs});
    res.report = aggregate(samples);
    write_file(out_path(cfg, "offline_runs.csv"), [&](std::ostream& os) { write_offline_runs(os, cfg.family, res.runs); });
    write_file(out_path(cfg, "offline_report.csv"), [&](std::ostream& os) { write_report_rows(os, res.report); });
    return res;
}

// ---------------------------------------------------------------------------------------------
// Solve and ground truth

struct SolveResult {
    RunRecord record;
    GroundTruthGrid truth;
    GroundTruthGrid solution;
    /// Point-wise prediction minus truth.
    GroundTruthGrid error;
};

/// One two-phase run at solve.param with solve.action_adam and solve.action_lbfgs.
inline SolveResult cmd_solve(const ExperimentConfig& cfg, Progress& progress) {
    cfg.validate();
    const PdeProblem p = make_instance(cfg, cfg.solve_param());
    const Action a1 = parse_action(cfg.solve.action_adam);
    const Action a2 = cfg.solve.action_lbfgs.empty() ? a1 : parse_action(cfg.solve.action_lbfgs);
    const LossLayout layout = multi_domain_layout(p, instance_points(cfg, p, cfg.seed));
    SolveResult res;
    res.truth = instance_truth(cfg, p);
    const TwoPhaseOutcome o = train_two_phase(p, layout, a1, a2, cfg.train, res.truth, cfg.seed);
    res.record = make_run_record(p, action_index(a1), action_index(a2), cfg.seed, o);
    res.solution = res.truth;
    res.solution.values = predict_grid(make_model(layout, cfg.train.net, o.lbfgs.params), res.truth);
    res.error = res.truth;
    res.error.values = res.solution.values - res.truth.values;
    progress.line("solve ", to_string(p.family), " param ", p.param, " a1 ", action_index(a1), " a2 ",
                  action_index(a2), " err ", o.lbfgs.error);

    write_file(out_path(cfg, "solve_run.csv"), [&](std::ostream& os) { write_run_records(os, {res.record}); });
    write_file(out_path(cfg, "solve_solution.csv"), [&](std::ostream& os) { write_grid_csv(res.solution, os, "u"); });
    write_file(out_path(cfg, "solve_truth.csv"), [&](std::ostream& os) { write_grid_csv(res.truth, os, "u"); });
    write_file(out_path(cfg, "solve_error.csv"), [&](std::ostream& os) { write_grid_csv(res.error, os, "error"); });
    return res;
}

/// Reference grid at solve.param, cached under ground_truth.cache (default <out>/gt_cache).
inline GroundTruthGrid cmd_gt(const ExperimentConfig& cfg, Progress& progress) {
    cfg.validate();
    const PdeProblem p = make_instance(cfg, cfg.solve_param());
    const std::string cache = cfg.gt_cache.empty() ? out_path(cfg, "gt_cache").string() : cfg.gt_cache;
    const GroundTruthGrid g = cached_ground_truth(p, cache, cfg.ground_truth);
    write_file(out_path(cfg, "gt.csv"), [&](std::ostream& os) { write_grid_csv(g, os, "u"); });
    progress.line("gt ", to_string(p.family), " param ", p.param, " grid ", g.nx(), "x", g.ny());
    return g;
}

// ---------------------------------------------------------------------------------------------
// Report

struct ReportResult {
    std::vector<ReportRow> table;
    /// Element-wise mean of the accumulated-error curves; empty without online runs.
    std::vector<std::vector<double>> curves;
    int curve_runs = 0;
};

inline const std::vector<std::string>& curve_columns() {
    static const std::vector<std::string> c{"play", "metalic_acc_err", "random_acc_err", "metalic_acc_log_err",
                                            "random_acc_log_err"};
    return c;
}

/// Merges offline_runs.csv and accumulated_error.csv from each directory into `out`.
inline ReportResult cmd_report(const std::vector<std::string>& dirs, const std::string& out, bool svg = true) {
    if (dirs.empty()) throw ConfigError("report", "no run directories given");
    ReportResult res;
    std::vector<ErrorSample> samples;
    for (const auto& d : dirs) {
        const std::filesystem::path runs = std::filesystem::path(d) / "offline_runs.csv";
        if (std::filesystem::exists(runs)) {
            const CsvTable t = read_csv_file(runs.string());
            for (std::size_t i = 0; i < t.rows.size(); ++i) {
                samples.push_back({t.text(i, "family"), t.text(i, "method"), t.real(i, "err_lbfgs")});
            }
        }
        const std::filesystem::path curve = std::filesystem::path(d) / "accumulated_error.csv";
        if (std::filesystem::exists(curve)) {
            const CsvTable t = read_csv_file(curve.string());
            if (t.header != curve_columns()) throw SchemaError(curve.string() + ": unexpected columns");
            if (res.curve_runs == 0) {
                res.curves.assign(t.rows.size(), std::vector<double>(curve_columns().size(), 0.0));
            } else if (res.curves.size() != t.rows.size()) {
                throw SchemaError(curve.string() + ": curve length differs from the other runs");
            }
            for (std::size_t i = 0; i < t.rows.size(); ++i)
                for (std::size_t c = 0; c < curve_columns().size(); ++c) res.curves[i][c] += std::stod(t.rows[i][c]);
            ++res.curve_runs;
        }
    }
    if (samples.empty() && res.curve_runs == 0) {
        throw ConfigError("report", "no offline_runs.csv or accumulated_error.csv in the given directories");
    }
    for (auto& row : res.curves)
        for (double& v : row) v /= res.curve_runs;
    res.table = aggregate(samples);

    const std::filesystem::path dir(out);
    if (!samples.empty()) {
        write_file(dir / "report_table.csv", [&](std::ostream& os) { write_report_rows(os, res.table); });
    }
    if (res.curve_runs > 0) {
        std::ostringstream text;
        {
            CsvWriter w(text, curve_columns());
            for (const auto& row : res.curves) {
                w << static_cast<int>(row[0]);
                for (std::size_t c = 1; c < row.size(); ++c) w << row[c];
                w.end_row();
            }
        }
        write_file(dir / "report_curves.csv", [&](std::ostream& os) { os << text.str(); });
        if (svg) {
            std::istringstream in(text.str());
            const CsvTable t = read_csv(in, "report_curves.csv");
            write_file(dir / "report_curves.svg", [&](std::ostream& os) {
                write_curve_svg(os, t, "mean over " + std::to_string(res.curve_runs) + " run(s)");
            });
        }
    }
    return res;
}

}  // namespace metalic
