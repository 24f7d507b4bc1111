// Copyright 2026 The simtrack authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "simtrack/errors.hpp"
#include "simtrack/io.hpp"
#include "simtrack/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "pipeline config file (JSON)")->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", args.seed, "scenario seed (overrides config)")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--threads", args.threads, "worker threads (0 = hardware count)");
}

simtrack::PipelineConfig resolve(const CommonArgs& args) {
    simtrack::PipelineConfig cfg = simtrack::load_pipeline_config(args.config);
    simtrack::CliOverrides ov;
    if (!args.out_dir.empty()) ov.out_dir = args.out_dir;
    if (args.seed_set) ov.seed = args.seed;
    if (args.threads >= 0) ov.threads = args.threads;
    simtrack::apply_overrides(cfg, ov);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"simtrack: EO + passive-RF drone detection, localization and tracking"};
    app.require_subcommand(1);

    CommonArgs args;
    void (*commands[])(const simtrack::PipelineConfig&) = {
        simtrack::cmd_simulate,   simtrack::cmd_detect_eo, simtrack::cmd_localize_rf,
        simtrack::cmd_fingerprint, simtrack::cmd_fuse,      simtrack::cmd_evaluate,
    };
    const char* names[] = {"simulate", "detect-eo", "localize-rf", "fingerprint", "fuse",
                           "evaluate"};
    const char* blurbs[] = {
        "generate scenario frames, IQ captures and truth files",
        "RPCA foreground separation and detection extraction",
        "TDOA estimation and 3D localization per band",
        "train/apply the device-ID template classifier",
        "time alignment, association, Kalman tracking and labeling",
        "metrics against the scenario truth",
    };
    int selected = -1;
    for (int i = 0; i < 6; ++i) {
        CLI::App* cmd = app.add_subcommand(names[i], blurbs[i]);
        add_common(cmd, args);
        cmd->callback([&selected, i]() { selected = i; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        commands[selected](resolve(args));
    } catch (const simtrack::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
