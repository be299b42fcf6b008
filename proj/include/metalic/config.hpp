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

/// Experiment configuration.
///
/// A config file is one JSON object. Precedence, lowest first: built-in defaults, the preset,
/// the file's values, command-line flags. Unknown keys and mistyped values are errors that name
/// the offending field path. Keys:
///
///   preset            "desk" | "paper"
///   family            "poisson" | "advection" | "reaction" | "burgers"
///   poisson_variant   "parametric" | "unit"
///   param_range       [lo, hi]              defaults to the family range
///   mode              "single" | "seq"
///   seed, jobs, out, svg
///   sampling          n_collocation, n_boundary, n_interface, scheme
///   net               hidden_layers, width
///   adam              learning_rate, beta1, beta2, epsilon, epochs
///   lbfgs             max_iterations, grad_tolerance, param_change_tolerance, memory
///   weights           lambda_b, lambda_i, halve_pairs
///   train             divergence_threshold, error_cap
///   ground_truth      poisson_n, poisson_refine, nx, nt, hermite_nodes, cache
///   bandit            plays, ucb_c, gamma, scorer, warmup_plays, hyper_every, tau1, tau2, noise_var
///   offline           n_test, random_baselines, baselines
///   solve             param, action_adam, action_lbfgs

#include "metalic/bandit.hpp"
#include "metalic/ground_truth.hpp"
#include "metalic/trainer.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace metalic {

struct OfflineConfig {
    int n_test = 100;
    /// Also evaluate Random-Single and Random-Seq.
    bool random_baselines = true;
    std::vector<Baseline> baselines{Baseline::pinn_sub, Baseline::merge_h, Baseline::merge_v};
};

struct SolveConfig {
    /// Defaults to the midpoint of the parameter range.
    std::optional<double> param;
    std::string action_adam = "0";
    /// Empty means the ADAM action.
    std::string action_lbfgs;
};

struct ExperimentConfig {
    std::string preset;
    Family family = Family::poisson;
    PoissonVariant poisson_variant = PoissonVariant::parametric;
    std::optional<ParamRange> range;
    bool sequential = false;
    SamplingConfig sampling;
    TrainConfig train;
    GroundTruthOptions ground_truth;
    /// Ground-truth cache directory; empty disables caching.
    std::string gt_cache;
    BanditConfig bandit;
    OfflineConfig offline;
    SolveConfig solve;
    std::string out = "runs/default";
    std::uint64_t seed = 0;
    /// Worker threads; 0 means one per hardware thread.
    int jobs = 1;
    bool svg = true;

    ParamRange param_range() const { return range.value_or(default_param_range(family)); }

    double solve_param() const {
        const ParamRange r = param_range();
        return solve.param.value_or(0.5 * (r.lo + r.hi));
    }

    /// Bandit settings with the global seed and the trainer's failure caps.
    BanditConfig bandit_config() const {
        BanditConfig b = bandit;
        b.seed = seed;
        b.error_cap = train.error_cap;
        b.loss_cap = train.divergence_threshold;
        return b;
    }

    void validate() const {
        const ParamRange r = param_range();
        if (!(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo < r.hi)) {
            throw ConfigError("param_range", "need finite lo < hi");
        }
        if (family == Family::burgers && !(r.lo > 0.0)) throw ConfigError("param_range", "viscosity must be > 0");
        sampling.validate();
        train.validate();
        bandit_config().validate();
        const GroundTruthOptions& g = ground_truth;
        if (g.poisson_n < 3) throw ConfigError("ground_truth.poisson_n", "must be >= 3");
        if (g.poisson_refine < 1) throw ConfigError("ground_truth.poisson_refine", "must be >= 1");
        if (g.nx < 2) throw ConfigError("ground_truth.nx", "must be >= 2");
        if (g.nt < 2) throw ConfigError("ground_truth.nt", "must be >= 2");
        if (g.hermite_nodes < 1) throw ConfigError("ground_truth.hermite_nodes", "must be >= 1");
        if (offline.n_test < 1) throw ConfigError("offline.n_test", "must be >= 1");
        if (solve.param && !r.contains(*solve.param)) throw ConfigError("solve.param", "outside param_range");
        parse_action(solve.action_adam);
        if (!solve.action_lbfgs.empty()) parse_action(solve.action_lbfgs);
        if (out.empty()) throw ConfigError("out", "must not be empty");
        if (jobs < 0) throw ConfigError("jobs", "must be >= 0");
    }
};

/// desk: 30 plays, 2K ADAM epochs, 2K L-BFGS iterations, 5 offline tests.
/// paper: 200 plays, 10K ADAM epochs, 50K L-BFGS iterations, 100 offline tests.
inline void apply_preset(ExperimentConfig& c, const std::string& name) {
    if (name == "desk") {
        c.bandit.plays = 30;
        c.train.adam.epochs = 2000;
        c.train.lbfgs.max_iterations = 2000;
        c.offline.n_test = 5;
    } else if (name == "paper") {
        c.bandit.plays = 200;
        c.train.adam.epochs = 10000;
        c.train.lbfgs.max_iterations = 50000;
        c.offline.n_test = 100;
    } else {
        throw ConfigError("preset", "unknown preset '" + name + "' (expected desk or paper)");
    }
    c.preset = name;
}

inline const char* to_string(PoissonVariant v) { return v == PoissonVariant::unit ? "unit" : "parametric"; }

inline PoissonVariant poisson_variant_from_string(const std::string& s) {
    if (s == "parametric") return PoissonVariant::parametric;
    if (s == "unit") return PoissonVariant::unit;
    throw ConfigError("poisson_variant", "expected parametric or unit, got '" + s + "'");
}

// ---------------------------------------------------------------------------------------------
// JSON

using Json = nlohmann::json;

namespace detail {

/// The message of `e` without its field-path prefix.
inline std::string bare_message(const ConfigError& e) {
    const std::string m = e.what();
    return m.substr(std::min(m.size(), e.field().size() + 2));
}

/// Reads the members of one JSON object and rejects members nobody asked for.
class ObjectReader {
public:
    ObjectReader(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError(path_.empty() ? "config" : path_, "expected an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const Json* get(const std::string& key) {
        used_.insert(key);
        const auto it = j_->find(key);
        return it == j_->end() ? nullptr : &*it;
    }

    void read(const std::string& key, double& v) {
        if (const Json* x = get(key)) {
            if (!x->is_number()) throw ConfigError(field(key), "expected a number");
            v = x->get<double>();
        }
    }
    void read(const std::string& key, int& v) {
        if (const Json* x = get(key)) {
            if (!x->is_number_integer()) throw ConfigError(field(key), "expected an integer");
            const auto w = x->get<long long>();
            if (w < std::numeric_limits<int>::min() || w > std::numeric_limits<int>::max()) {
                throw ConfigError(field(key), "integer out of range");
            }
            v = static_cast<int>(w);
        }
    }
    void read(const std::string& key, std::uint64_t& v) {
        if (const Json* x = get(key)) {
            if (x->is_number_unsigned()) {
                v = x->get<std::uint64_t>();
            } else if (x->is_number_integer() && x->get<long long>() >= 0) {
                v = static_cast<std::uint64_t>(x->get<long long>());
            } else {
                throw ConfigError(field(key), "expected a non-negative integer");
            }
        }
    }
    void read(const std::string& key, bool& v) {
        if (const Json* x = get(key)) {
            if (!x->is_boolean()) throw ConfigError(field(key), "expected true or false");
            v = x->get<bool>();
        }
    }
    void read(const std::string& key, std::string& v) {
        if (const Json* x = get(key)) {
            if (!x->is_string()) throw ConfigError(field(key), "expected a string");
            v = x->get<std::string>();
        }
    }

    /// Reads a string member through `parse`, which may throw ConfigError with a bare name.
    template <typename T, typename Parse>
    void read_enum(const std::string& key, T& v, Parse&& parse) {
        std::string s;
        if (j_->contains(key)) {
            read(key, s);
            try {
                v = parse(s);
            } catch (const ConfigError& e) {
                throw ConfigError(field(key), bare_message(e));
            }
        } else {
            used_.insert(key);
        }
    }

    template <typename F>
    void child(const std::string& key, F&& f) {
        if (const Json* x = get(key)) {
            ObjectReader r(*x, field(key));
            f(r);
            r.finish();
        }
    }

    void finish() const {
        for (auto it = j_->begin(); it != j_->end(); ++it) {
            if (!used_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
        }
    }

private:
    const Json* j_;
    std::string path_;
    std::set<std::string> used_;
};

}  // namespace detail

/// Overlays the members of `j` onto `c`. The preset member is only checked here; callers apply
/// presets first so that file values win over them.
inline void apply_json(ExperimentConfig& c, const Json& j) {
    detail::ObjectReader r(j, "");
    std::string preset;
    r.read("preset", preset);
    r.read_enum("family", c.family, [](const std::string& s) { return family_from_string(s); });
    r.read_enum("poisson_variant", c.poisson_variant, poisson_variant_from_string);
    if (const Json* x = r.get("param_range")) {
        if (!x->is_array() || x->size() != 2 || !(*x)[0].is_number() || !(*x)[1].is_number()) {
            throw ConfigError("param_range", "expected [lo, hi]");
        }
        c.range = ParamRange{(*x)[0].get<double>(), (*x)[1].get<double>()};
    }
    r.read_enum("mode", c.sequential, [](const std::string& s) {
        if (s == "single") return false;
        if (s == "seq") return true;
        throw ConfigError("mode", "expected single or seq, got '" + s + "'");
    });
    r.read("seed", c.seed);
    r.read("jobs", c.jobs);
    r.read("out", c.out);
    r.read("svg", c.svg);
    r.child("sampling", [&](detail::ObjectReader& s) {
        s.read("n_collocation", c.sampling.n_collocation);
        s.read("n_boundary", c.sampling.n_boundary);
        s.read("n_interface", c.sampling.n_interface);
        s.read_enum("scheme", c.sampling.scheme, [](const std::string& v) { return sampling_scheme_from_string(v); });
    });
    r.child("net", [&](detail::ObjectReader& s) {
        s.read("hidden_layers", c.train.net.hidden_layers);
        s.read("width", c.train.net.width);
    });
    r.child("adam", [&](detail::ObjectReader& s) {
        s.read("learning_rate", c.train.adam.learning_rate);
        s.read("beta1", c.train.adam.beta1);
        s.read("beta2", c.train.adam.beta2);
        s.read("epsilon", c.train.adam.epsilon);
        s.read("epochs", c.train.adam.epochs);
    });
    r.child("lbfgs", [&](detail::ObjectReader& s) {
        s.read("max_iterations", c.train.lbfgs.max_iterations);
        s.read("grad_tolerance", c.train.lbfgs.grad_tolerance);
        s.read("param_change_tolerance", c.train.lbfgs.param_change_tolerance);
        s.read("memory", c.train.lbfgs.memory);
    });
    r.child("weights", [&](detail::ObjectReader& s) {
        s.read("lambda_b", c.train.weights.lambda_b);
        s.read("lambda_i", c.train.weights.lambda_i);
        s.read("halve_pairs", c.train.weights.halve_pairs);
    });
    r.child("train", [&](detail::ObjectReader& s) {
        s.read("divergence_threshold", c.train.divergence_threshold);
        s.read("error_cap", c.train.error_cap);
    });
    r.child("ground_truth", [&](detail::ObjectReader& s) {
        s.read("poisson_n", c.ground_truth.poisson_n);
        s.read("poisson_refine", c.ground_truth.poisson_refine);
        s.read("nx", c.ground_truth.nx);
        s.read("nt", c.ground_truth.nt);
        s.read("hermite_nodes", c.ground_truth.hermite_nodes);
        s.read("cache", c.gt_cache);
    });
    r.child("bandit", [&](detail::ObjectReader& s) {
        s.read("plays", c.bandit.plays);
        s.read("ucb_c", c.bandit.ucb_c);
        s.read("gamma", c.bandit.gamma);
        s.read_enum("scorer", c.bandit.scorer, [](const std::string& v) { return scorer_from_string(v); });
        s.read("warmup_plays", c.bandit.warmup_plays);
        s.read("hyper_every", c.bandit.hyper_every);
        s.read("tau1", c.bandit.kernel.tau1);
        s.read("tau2", c.bandit.kernel.tau2);
        s.read("noise_var", c.bandit.kernel.noise_var);
    });
    r.child("offline", [&](detail::ObjectReader& s) {
        s.read("n_test", c.offline.n_test);
        s.read("random_baselines", c.offline.random_baselines);
        if (const Json* x = s.get("baselines")) {
            if (!x->is_array()) throw ConfigError("offline.baselines", "expected an array of names");
            c.offline.baselines.clear();
            for (const Json& b : *x) {
                if (!b.is_string()) throw ConfigError("offline.baselines", "expected an array of names");
                try {
                    c.offline.baselines.push_back(baseline_from_string(b.get<std::string>()));
                } catch (const ConfigError& e) {
                    throw ConfigError("offline.baselines", detail::bare_message(e));
                }
            }
        }
    });
    r.child("solve", [&](detail::ObjectReader& s) {
        if (const Json* x = s.get("param")) {
            if (!x->is_number()) throw ConfigError("solve.param", "expected a number");
            c.solve.param = x->get<double>();
        }
        s.read("action_adam", c.solve.action_adam);
        s.read("action_lbfgs", c.solve.action_lbfgs);
    });
    r.finish();
}

/// Every setting, resolved; loading the result reproduces `c`.
inline Json to_json(const ExperimentConfig& c) {
    const ParamRange range = c.param_range();
    Json j;
    if (!c.preset.empty()) j["preset"] = c.preset;
    j["family"] = to_string(c.family);
    j["poisson_variant"] = to_string(c.poisson_variant);
    j["param_range"] = {range.lo, range.hi};
    j["mode"] = c.sequential ? "seq" : "single";
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    j["out"] = c.out;
    j["svg"] = c.svg;
    j["sampling"] = {{"n_collocation", c.sampling.n_collocation},
                     {"n_boundary", c.sampling.n_boundary},
                     {"n_interface", c.sampling.n_interface},
                     {"scheme", to_string(c.sampling.scheme)}};
    j["net"] = {{"hidden_layers", c.train.net.hidden_layers}, {"width", c.train.net.width}};
    const AdamConfig& a = c.train.adam;
    j["adam"] = {{"learning_rate", a.learning_rate}, {"beta1", a.beta1}, {"beta2", a.beta2},
                 {"epsilon", a.epsilon}, {"epochs", a.epochs}};
    const LbfgsConfig& l = c.train.lbfgs;
    j["lbfgs"] = {{"max_iterations", l.max_iterations}, {"grad_tolerance", l.grad_tolerance},
                  {"param_change_tolerance", l.param_change_tolerance}, {"memory", l.memory}};
    const LossWeights& w = c.train.weights;
    j["weights"] = {{"lambda_b", w.lambda_b}, {"lambda_i", w.lambda_i}, {"halve_pairs", w.halve_pairs}};
    j["train"] = {{"divergence_threshold", c.train.divergence_threshold}, {"error_cap", c.train.error_cap}};
    const GroundTruthOptions& g = c.ground_truth;
    j["ground_truth"] = {{"poisson_n", g.poisson_n}, {"poisson_refine", g.poisson_refine}, {"nx", g.nx},
                         {"nt", g.nt}, {"hermite_nodes", g.hermite_nodes}, {"cache", c.gt_cache}};
    const BanditConfig& b = c.bandit;
    j["bandit"] = {{"plays", b.plays}, {"ucb_c", b.ucb_c}, {"gamma", b.gamma}, {"scorer", to_string(b.scorer)},
                   {"warmup_plays", b.warmup_plays}, {"hyper_every", b.hyper_every}, {"tau1", b.kernel.tau1},
                   {"tau2", b.kernel.tau2}, {"noise_var", b.kernel.noise_var}};
    Json names = Json::array();
    for (Baseline x : c.offline.baselines) names.push_back(to_string(x));
    j["offline"] = {{"n_test", c.offline.n_test}, {"random_baselines", c.offline.random_baselines},
                    {"baselines", names}};
    j["solve"] = {{"action_adam", c.solve.action_adam}, {"action_lbfgs", c.solve.action_lbfgs}};
    if (c.solve.param) j["solve"]["param"] = *c.solve.param;
    return j;
}

/// Command-line overrides; unset members leave the file value alone.
struct ConfigOverrides {
    std::optional<std::string> preset, family, scorer, out, mode;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs, plays;
    std::optional<double> param;
    std::optional<std::string> action_adam, action_lbfgs;
};

inline void apply_overrides(ExperimentConfig& c, const ConfigOverrides& o) {
    if (o.family) c.family = family_from_string(*o.family);
    if (o.scorer) c.bandit.scorer = scorer_from_string(*o.scorer);
    if (o.out) c.out = *o.out;
    if (o.mode) {
        if (*o.mode != "single" && *o.mode != "seq") throw ConfigError("mode", "expected single or seq");
        c.sequential = *o.mode == "seq";
    }
    if (o.seed) c.seed = *o.seed;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.plays) c.bandit.plays = *o.plays;
    if (o.param) c.solve.param = *o.param;
    if (o.action_adam) c.solve.action_adam = *o.action_adam;
    if (o.action_lbfgs) c.solve.action_lbfgs = *o.action_lbfgs;
}

/// Defaults, then the preset (flag over file), then the file, then the remaining flags.
inline ExperimentConfig resolve_config(const Json& file, const ConfigOverrides& o = {}) {
    ExperimentConfig c;
    std::string preset = o.preset.value_or("");
    if (preset.empty() && file.is_object() && file.contains("preset") && file["preset"].is_string()) {
        preset = file["preset"].get<std::string>();
    }
    if (!preset.empty()) apply_preset(c, preset);
    apply_json(c, file);
    apply_overrides(c, o);
    c.validate();
    return c;
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config", path + ": " + e.what());
    }
}

/// An empty path means no file.
inline ExperimentConfig load_config(const std::string& path, const ConfigOverrides& o = {}) {
    return resolve_config(path.empty() ? Json::object() : read_json_file(path), o);
}

}  // namespace metalic
