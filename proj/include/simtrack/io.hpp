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

#include "simtrack/eo_detection.hpp"
#include "simtrack/fingerprint.hpp"
#include "simtrack/fusion.hpp"
#include "simtrack/simulator.hpp"
#include "simtrack/tdoa.hpp"

namespace simtrack {

// ---- logging ---------------------------------------------------------------

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };
LogLevel log_level();  // from SIMTRACK_LOG (error|warn|info|debug)
void log_msg(LogLevel level, const std::string& msg);
inline void log_warn(const std::string& m) { log_msg(LogLevel::warn, m); }
inline void log_info(const std::string& m) { log_msg(LogLevel::info, m); }
inline void log_debug(const std::string& m) { log_msg(LogLevel::debug, m); }

// ---- frames ----------------------------------------------------------------

void write_pgm(const std::string& path, const Eigen::MatrixXf& img01);
Eigen::MatrixXf read_pgm(const std::string& path);

/// Raw cube: header N1, N2, K (little-endian u32) then K row-major u8 frames.
void write_frame_cube(const std::string& path, const std::vector<Eigen::MatrixXf>& frames);
std::vector<Eigen::MatrixXf> read_frame_cube(const std::string& path);

/// All *.pgm in lexicographic order (= time order).
std::vector<Eigen::MatrixXf> read_frames_dir(const std::string& dir);

// ---- IQ captures -----------------------------------------------------------

struct IqHeader {
    double fs = 0.0;
    double f_center = 0.0;
    double t0 = 0.0;
    std::uint32_t sensor_id = 0;
    std::uint64_t n = 0;
};

void write_iq(const std::string& path, const RFCapture& cap);
RFCapture read_iq(const std::string& path);

/// Streaming writer: header first (sample count patched on close).
class IqWriter {
public:
    IqWriter(const std::string& path, double fs, double f_center, double t0,
             std::uint32_t sensor_id);
    ~IqWriter();
    void append(const Eigen::Ref<const Eigen::VectorXcd>& chunk);
    void close();

private:
    struct Impl;
    Impl* impl_;
};

/// Random-access reader; reads are zero-padded outside [0, n).
class IqReader {
public:
    explicit IqReader(const std::string& path);
    ~IqReader();
    const IqHeader& header() const;
    Eigen::VectorXcd read(std::int64_t start, std::int64_t count) const;

private:
    struct Impl;
    Impl* impl_;
};

// ---- CSV artifacts ---------------------------------------------------------

void write_detections_csv(const std::string& path, const std::vector<Detection2D>& detections);
std::vector<Detection2D> read_detections_csv(const std::string& path);

void write_locations_csv(const std::string& path, const std::vector<RFLocation>& locations);
std::vector<RFLocation> read_locations_csv(const std::string& path);

void write_confidences_csv(const std::string& path, const ClassSet& classes,
                           const std::vector<ConfidenceVector>& stream);

struct TrackRow {
    double t = 0.0;
    int track_id = 0;
    std::string device_label;
    std::string provenance;
    double u = 0.0, v = 0.0, udot = 0.0, vdot = 0.0;
    std::string status;
};
void write_tracks_csv(const std::string& path, const std::vector<TrackRow>& rows);
std::vector<TrackRow> read_tracks_csv(const std::string& path);

void write_eo_truth_csv(const std::string& path, const std::vector<EoTruthRow>& rows);
std::vector<EoTruthRow> read_eo_truth_csv(const std::string& path);

void write_rf_truth_csv(const std::string& path, const std::vector<RfTruthRow>& rows);

void write_world_truth_csv(const std::string& path, const std::vector<WorldTruthRow>& rows);
std::vector<WorldTruthRow> read_world_truth_csv(const std::string& path);

// ---- configuration ---------------------------------------------------------

CameraModel load_camera_config(const std::string& path);
Scenario load_scenario(const std::string& path);
void save_scenario(const std::string& path, const Scenario& scn);

// ---- misc ------------------------------------------------------------------

void ensure_dir(const std::string& path);
bool file_exists(const std::string& path);
std::string read_file_bytes(const std::string& path);
std::string format_double(double v);
/// strtod with strict full-string validation; underflow rounds to zero
/// instead of throwing (confidence columns legitimately carry subnormals).
double parse_double(const std::string& s);

}  // namespace simtrack
