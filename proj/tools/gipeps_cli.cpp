// Copyright 2026 The gipeps Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// gipeps <command> --config cfg.json --out dir [--seed S] [--trials N] [--threads T]

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "gipeps/commands.hpp"

namespace {

struct Args {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::int64_t trials = 0;
    int threads = 1;
};

void add_common(CLI::App *sub, Args &a, bool with_trials) {
    sub->add_option("--config", a.config, "JSON config file (defaults when omitted)")->check(CLI::ExistingFile);
    sub->add_option("--out", a.out, "output directory");
    sub->add_option("--seed", a.seed, "override the config seed");
    if (with_trials) sub->add_option("--trials", a.trials, "override the trial count")->check(CLI::PositiveNumber);
    sub->add_option("--threads", a.threads, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Preparation of G-injective PEPS: verification and simulation"};
    app.set_version_flag("--version", std::string(gipeps::kVersion));
    app.require_subcommand(1);

    Args args;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"verify-group", "check a group table, its irreps and the Delta map"},
        {"verify-appendix", "check the regrouped tensor equivalence"},
        {"overlap", "principal overlaps between consecutive ground spaces"},
        {"simulate", "run the sequential preparation protocol"},
        {"sweep", "overlap bound over a grid of condition numbers and seeds"},
    };
    for (const auto &[name, help] : commands) add_common(app.add_subcommand(name, help), args, name == "simulate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : gipeps::kExitConfig;
    }

    const CLI::App *sub = app.get_subcommands().front();
    gipeps::RunOptions opts;
    opts.out_dir = args.out;
    opts.threads = args.threads;
    if (sub->count("--seed")) opts.seed = args.seed;
    if (sub->get_name() == "simulate" && sub->count("--trials")) opts.trials = args.trials;

    gipeps::json raw = gipeps::json::object();
    if (!args.config.empty()) {
        std::ifstream is(args.config);
        try {
            raw = gipeps::json::parse(is);
        } catch (const gipeps::json::exception &e) {
            gipeps::json err = {{"command", sub->get_name()},
                                {"status", "error"},
                                {"error", {{"code", "InvalidConfig"}, {"message", e.what()}}}};
            std::cout << err.dump(2) << '\n';
            return gipeps::kExitConfig;
        }
    }

    const auto res = gipeps::run_command(sub->get_name(), raw, opts);
    std::cout << res.report.dump(2) << '\n';
    return res.exit_code;
}
