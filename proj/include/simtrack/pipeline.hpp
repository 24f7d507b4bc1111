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

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "simtrack/eo_detection.hpp"
#include "simtrack/fusion.hpp"
#include "simtrack/simulator.hpp"

namespace simtrack {

struct RpcaOverrides {
    std::optional<double> tau, lambda, rho, beta0, tol;
    std::optional<int> max_iters;
};

struct EoStageConfig {
    int batch = 30;  // frames per RPCA batch (1 s at 30 Hz)
    int tile_rows = 2;
    int tile_cols = 2;
    std::string external_detections;  // optional CSV merged into the EO stream
};

struct TdoaStageConfig {
    double output_rate_hz = 10.0;  // fused localization cadence
    double min_peak_quality = 2.0;
    double altitude = 30.0;  // prior for 3-sensor bands
    double sigma_z = 10.0;
    double weight_z = 1.0;
    double max_lag_guard_s = 2e-6;
};

struct FingerprintStageConfig {
    std::string templates = "templates.bin";  // relative to out_dir unless absolute
    struct TrainSpec {
        std::string scenario;
        int pass = 1;
    };
    std::vector<TrainSpec> train;
    std::vector<std::string> report_scenarios;  // write confusion.csv over these presets
    double conf_scale = 3.0;
    double min_conf = 0.5;
    int min_per_label = 50;
    std::string external_confidences;  // bypasses the baseline classifier when set
};

struct PipelineConfig {
    Scenario scenario;
    std::string out_dir = "out";
    int threads = 0;
    RpcaOverrides rpca;
    MaskParams mask;
    EoStageConfig eo;
    TdoaStageConfig tdoa;
    FingerprintStageConfig fingerprint;
    FusionConfig fusion;
    bool fusion_use_rf = true;
    bool fusion_offsets_explicit = false;  // user supplied fusion.offsets verbatim
};

/// Parses the JSON pipeline config; unknown keys anywhere are rejected.
PipelineConfig load_pipeline_config(const std::string& path);

struct CliOverrides {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};
void apply_overrides(PipelineConfig& cfg, const CliOverrides& ov);

void cmd_simulate(const PipelineConfig& cfg);
void cmd_detect_eo(const PipelineConfig& cfg);
void cmd_localize_rf(const PipelineConfig& cfg);
void cmd_fingerprint(const PipelineConfig& cfg);
void cmd_fuse(const PipelineConfig& cfg);
void cmd_evaluate(const PipelineConfig& cfg);

}  // namespace simtrack
