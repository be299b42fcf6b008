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

// Command-line driver: metalic online|offline|solve|report|gt.
// Exit codes: 0 success, 2 configuration or input error, 3 numerical failure, 1 anything else.

#include "metalic/metalic.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

template <typename T>
void set_if(std::optional<T>& dst, const CLI::Option* opt, const T& value) {
    if (opt->count() > 0) dst = value;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned interface conditions for multi-domain PINNs"};
    app.require_subcommand(1, 1);

    std::string config_path, preset, family, scorer, out, mode, action, action2;
    std::uint64_t seed = 0;
    int jobs = 1, plays = 0;
    double param = 0.0;
    bool quiet = false;
    std::vector<std::string> dirs;

    struct Flags {
        CLI::Option *seed, *preset, *family, *scorer, *out, *mode, *jobs, *plays, *param, *action, *action2;
    };
    auto add_common = [&](CLI::App* sub) {
        Flags f{};
        sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        f.seed = sub->add_option("--seed", seed, "global seed");
        f.preset = sub->add_option("--preset", preset, "desk or paper");
        f.family = sub->add_option("--family", family, "poisson, advection, reaction or burgers");
        f.scorer = sub->add_option("--scorer", scorer, "ucb or ts");
        f.out = sub->add_option("--out", out, "output directory");
        f.mode = sub->add_option("--mode", mode, "single or seq");
        f.jobs = sub->add_option("--jobs", jobs, "worker threads (0: one per hardware thread)");
        f.plays = sub->add_option("--plays", plays, "number of online plays");
        f.param = sub->add_option("--param", param, "PDE parameter for solve and gt");
        f.action = sub->add_option("--action", action, "ADAM-phase action: index or 9-digit mask");
        f.action2 = sub->add_option("--action2", action2, "L-BFGS-phase action (default: --action)");
        sub->add_flag("--quiet", quiet, "suppress progress lines");
        return f;
    };

    CLI::App* online = app.add_subcommand("online", "run METALIC and the paired Random baseline");
    CLI::App* offline = app.add_subcommand("offline", "evaluate the learned models on fresh PDEs");
    CLI::App* solve = app.add_subcommand("solve", "train once with a fixed action and export grids");
    CLI::App* gt = app.add_subcommand("gt", "compute and cache a reference solution grid");
    CLI::App* report = app.add_subcommand("report", "aggregate run directories");
    std::map<CLI::App*, Flags> flags;
    for (CLI::App* sub : {online, offline, solve, gt}) flags[sub] = add_common(sub);
    report->add_option("dirs", dirs, "run directories")->required();
    report->add_option("--out", out, "output directory")->required();
    bool no_svg = false;
    report->add_flag("--no-svg", no_svg, "skip the SVG plot");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (report->parsed()) {
            const metalic::ReportResult r = metalic::cmd_report(dirs, out, !no_svg);
            std::cout << "report: " << r.table.size() << " table rows, " << r.curve_runs << " curve run(s) -> " << out
                      << "\n";
            return 0;
        }
        CLI::App* sub = app.get_subcommands().front();
        const Flags& f = flags.at(sub);
        metalic::ConfigOverrides o;
        set_if(o.preset, f.preset, preset);
        set_if(o.family, f.family, family);
        set_if(o.scorer, f.scorer, scorer);
        set_if(o.out, f.out, out);
        set_if(o.mode, f.mode, mode);
        set_if(o.seed, f.seed, seed);
        set_if(o.jobs, f.jobs, jobs);
        set_if(o.plays, f.plays, plays);
        set_if(o.param, f.param, param);
        set_if(o.action_adam, f.action, action);
        set_if(o.action_lbfgs, f.action2, action2);
        const metalic::ExperimentConfig cfg = metalic::load_config(config_path, o);
        metalic::Progress progress(quiet ? nullptr : &std::cerr);

        if (sub == online) {
            const metalic::OnlineResult r = metalic::cmd_online(cfg, progress);
            const auto m = metalic::accumulated_error(r.metalic.plays), b = metalic::accumulated_error(r.random.plays);
            std::cout << "online: " << r.metalic.plays.size() << " plays; accumulated error METALIC "
                      << (m.empty() ? 0.0 : m.back()) << ", Random " << (b.empty() ? 0.0 : b.back()) << " -> "
                      << cfg.out << "\n";
        } else if (sub == offline) {
            const metalic::OfflineResult r = metalic::cmd_offline(cfg, progress);
            for (const auto& row : r.report) {
                std::cout << row.method << ": " << row.mean << " +- " << row.stddev << " (n=" << row.n << ")\n";
            }
        } else if (sub == solve) {
            const metalic::SolveResult r = metalic::cmd_solve(cfg, progress);
            std::cout << "solve: relative L2 error " << r.record.err_lbfgs << " -> " << cfg.out << "\n";
        } else {
            const metalic::GroundTruthGrid g = metalic::cmd_gt(cfg, progress);
            std::cout << "gt: " << g.nx() << "x" << g.ny() << " grid -> " << cfg.out << "\n";
        }
        return 0;
    } catch (const metalic::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const metalic::SchemaError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const metalic::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
