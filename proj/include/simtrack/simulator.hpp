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

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "simtrack/geometry.hpp"
#include "simtrack/rf_preproc.hpp"
#include "simtrack/tdoa.hpp"

namespace simtrack {

struct TxImpairments {
    double cfo_hz = 0.0;
    double iq_gain_db = 0.0;
    double iq_phase_deg = 0.0;
    double rise_time_s = 50e-6;
};

/// Burst transmitter description. The waveform is a root-raised-cosine QPSK
/// burst surrogate; only burst structure, band occupancy and front-end
/// impairments matter downstream.
struct TxSpec {
    double center_freq = 0.0;  // Hz
    double bandwidth = 0.0;    // occupied Hz (derived from symbol rate if 0)
    double symbol_rate = 0.0;  // Hz; snapped to an integer samples-per-symbol
    double burst_period = kDecisionWindowSec;
    double burst_len = 0.012;
    std::vector<double> hop_pattern;  // absolute Hz, cycled per burst
    TxImpairments impairments;
    double tx_power_db = 0.0;
};

struct Waypoint {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    double t = 0.0;
};

struct TargetSpec {
    std::string device;
    std::vector<Waypoint> waypoints;  // piecewise-linear, constant altitude
    double pixel_contrast = 0.1;      // signed, at range eo.range_ref
    double pixel_sigma = 1.2;         // point-spread width, px
    // Per-frame multiplicative amplitude flicker (lognormal sigma). Sub-pixel
    // targets scintillate in real EO data; without it a slowly approaching
    // target is temporally constant and belongs to the background by
    // construction.
    double scintillation = 0.25;
    TxSpec tx;
};

struct EoClutterParams {
    int background_rank = 3;
    double background_level = 0.45;
    double background_drift = 0.01;  // temporal coefficient amplitude; 0 = static
    double cloud_amplitude = 0.015;  // 0 disables the advected cloud field
    double cloud_speed_px = 4.0;     // px/s horizontal drift
    double cloud_sigma_px = 10.0;
    double noise_std = 0.001;   // sensor noise, intensity units (sub-quantization)
    double range_ref = 100.0;   // range at which pixel_contrast applies, meters
};

struct Scenario {
    std::string name;
    double duration = 10.0;
    double frame_rate = 30.0;
    int frame_height = 256;
    int frame_width = 320;
    CameraModel camera;
    SensorLayout sensors;
    std::vector<TargetSpec> targets;
    std::map<std::uint32_t, double> rf_offsets;  // sensor clock minus unified, s
    std::uint64_t seed = 1;

    // RF plumbing
    double rf_fs = kTdoaRate;
    std::map<std::uint32_t, double> sensor_tuning;  // sensor id -> tuned Hz
    double rf_noise_std = 0.05;
    double rf_active_sec = -1.0;  // <= 0: transmit for the whole duration
    double rf_amp_ref = 120.0;    // received amplitude at 1 m for 0 dB tx power

    EoClutterParams eo;

    void validate() const;
    double rf_active() const { return rf_active_sec > 0.0 ? rf_active_sec : duration; }
    /// Sensors sharing a tuned frequency, ordered by frequency then id.
    std::vector<std::vector<std::uint32_t>> tuning_groups() const;
};

Eigen::Vector3d target_position(const TargetSpec& spec, double t);

struct EoTruthRow {
    double t = 0.0;
    std::string target;
    double u = 0.0;
    double v = 0.0;
    bool in_frame = false;
};

struct WorldTruthRow {
    double t = 0.0;
    std::string target;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

struct EoGenResult {
    std::vector<Eigen::MatrixXf> frames;  // quantized intensities in [0, 1]
    std::vector<double> timestamps;
    std::vector<EoTruthRow> truth;
    std::vector<WorldTruthRow> world_truth;
    std::vector<std::string> warnings;
};

EoGenResult generate_eo(const Scenario& scn);

struct RfTruthRow {
    double t = 0.0;  // window start, unified timeline
    std::uint32_t sensor_a = 0;
    std::uint32_t sensor_b = 0;
    double delta_tau = 0.0;
    std::string target;
};

/// In-memory capture for one sensor covering unified time [0, rf_active).
/// clock_offset is set from the scenario's rf_offsets entry.
RFCapture generate_rf_capture(const Scenario& scn, std::uint32_t sensor_id);

/// Renders samples [n0, n1) of a sensor's capture into buf (unified time
/// n / rf_fs). Deterministic per (seed, sensor, chunk): the streaming writer
/// and generate_rf_capture produce identical samples.
void render_rf_chunk(const Scenario& scn, std::uint32_t sensor_id, std::int64_t n0,
                     std::int64_t n1, Eigen::VectorXcd& buf);

std::vector<RfTruthRow> rf_truth(const Scenario& scn);
std::vector<std::string> rf_band_warnings(const Scenario& scn);

/// Presets mirror the test-collect scenario rows at desk scale: r06 (single
/// Phantom, four sensors on one band, pronounced clouds, 12 s RF lag), r14
/// (Mavic negative / Phantom positive contrast, three sensors per drone, extra
/// 6 s offset on d106), r16 (hopping IF1200 + m600, larger footprints), plus
/// the r13/r15 training counterparts flown in the opposite direction.
Scenario preset(const std::string& name);

/// Training pass variant: reseeds and jitters the start of each trajectory.
Scenario preset_pass(const std::string& name, int pass);

}  // namespace simtrack
