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
#include <string>
#include <vector>

namespace simtrack {

// Fingerprinting runs on 250 kHz baseband slices in 0.0210 s decision windows
// (5250 samples); burst vectors are trimmed to 2600 samples. The TDOA path
// runs at 10 MHz on the same window cadence.
inline constexpr double kFingerprintRate = 250e3;
inline constexpr double kDecisionWindowSec = 0.0210;
inline constexpr int kDecisionWindowSamples = 5250;
inline constexpr int kFingerprintLength = 2600;
inline constexpr double kTdoaRate = 10e6;

/// Complex baseband sample stream from one sensor. t0 is the capture start on
/// the sensor's own clock; clock_offset is sensor clock minus the unified
/// timeline, so unified time of sample n is t0 - clock_offset + n / fs.
struct RFCapture {
    Eigen::VectorXcd samples;
    double fs = 0.0;
    double f_center = 0.0;
    double t0 = 0.0;
    std::uint32_t sensor_id = 0;
    double clock_offset = 0.0;

    void validate() const;
    double unified_start() const { return t0 - clock_offset; }
    double unified_end() const { return unified_start() + samples.size() / fs; }
};

/// Fixed-length fingerprint input vector (2600 complex samples at 250 kHz).
struct FingerprintVector {
    Eigen::VectorXcd iq;
    double fs = kFingerprintRate;
    double window_t = 0.0;  // window start on the unified timeline
    std::string device_truth;
};

/// Mixes by exp(-j 2 pi (f_target - f_center) t), low-passes to bw/2 with a
/// >= 60 dB stopband, and decimates to sample rate bw (multistage for integer
/// ratios, polyphase for rational). Group delay is compensated so t0 is
/// preserved: output sample j corresponds to input time t0 + j / bw.
RFCapture downconvert_filter_decimate(const RFCapture& cap, double f_target, double bw);

/// Power-spectrum centroid of the dominant contiguous occupied band within the
/// first `window_sec` of the capture (occupied = bins above the median noise
/// floor + 10 dB). Throws NoSignal if nothing exceeds the floor.
double detect_hop_center(const RFCapture& cap, double window_sec);

/// Slices a 250 kHz stream into consecutive 5250-sample decision windows,
/// finds burst edges with a moving-average energy detector (6 dB above the
/// lowest-decile floor, 16-sample dwell) and emits the 2600 samples from the
/// rising edge, zeroed after the falling edge. Windows with no burst yield
/// nothing.
std::vector<FingerprintVector> segment_and_trim(const RFCapture& baseband);

/// Band-limits to the occupied band, resamples to 10 MHz, and zeroes decision
/// windows whose energy sits below the noise floor + 6 dB. Requires
/// fs >= 10 MHz. The timeline (t0, window grid) is preserved.
RFCapture prepare_for_tdoa(const RFCapture& cap);

// Shared helpers for the streaming pipeline (identical математics applied in
// chunks); exposed for reuse and tests.
namespace detail {
/// Occupied-band edges [lo, hi] in Hz relative to f_center plus the median
/// noise floor (linear power per bin). Returns false when nothing is occupied.
bool occupied_band(const Eigen::Ref<const Eigen::VectorXcd>& samples, double fs, double* lo_hz,
                   double* hi_hz, double* floor_power);
/// Burst edges within one decision window given a global noise floor estimate
/// for the moving-average power. Returns false when no burst is present.
bool burst_edges(const Eigen::Ref<const Eigen::VectorXcd>& window, double floor_power, int* rise,
                 int* fall);
/// Lowest-decile moving-average power over a stream (the noise-floor rule).
double noise_floor_ma(const Eigen::Ref<const Eigen::VectorXcd>& samples);
}  // namespace detail

}  // namespace simtrack
