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
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "simtrack/eo_detection.hpp"
#include "simtrack/geometry.hpp"
#include "simtrack/tdoa.hpp"

namespace simtrack {

enum class TrackStatus { tentative, confirmed, deleted };
enum class LabelProvenance { none, hungarian_notional, rf_fingerprint };

const char* to_string(TrackStatus s);
const char* to_string(LabelProvenance p);

/// Constant-velocity Kalman track in the pixel plane: state (u, v, udot, vdot).
struct TrackState {
    Eigen::Vector4d state = Eigen::Vector4d::Zero();
    Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
    int track_id = 0;
    std::string device_label;
    LabelProvenance provenance = LabelProvenance::none;
    int hits = 0;
    int misses = 0;
    int consecutive_misses = 0;
    TrackStatus status = TrackStatus::tentative;
    std::deque<bool> recent;  // hit history over the confirmation window
    std::map<std::string, int> label_votes;
    double last_nis = -1.0;  // normalized innovation squared of the last update
};

struct FusionConfig {
    double gate = 9.210340371976184;  // chi-square 2-dof 0.99 quantile
    double q = 10.0;                  // white-acceleration intensity, px^2/s^3
    double r_eo = 1.0;                // EO measurement std, px
    double r_rf = 5.0;                // projected-RF measurement std, px
    int m_confirm = 3;                // hits within the confirmation window
    int confirm_window = 5;
    int n_miss = 15;  // consecutive misses before deletion
    std::map<std::string, double> offsets;  // per-source timeline offsets, seconds
    bool rf_as_measurement = true;
    double label_radius_px = 20.0;
    double spawn_velocity_std = 50.0;  // px/s prior for new tracks

    void validate() const;
};

/// Applies each stream's configured offset (corrected t = t - offset) and
/// merges into one time-ordered list; at equal times EO sorts before external
/// before RF. Throws MissingOffset naming any stream without an offset.
std::vector<Detection2D> align_timeline(
    const std::vector<std::pair<std::string, std::vector<Detection2D>>>& streams,
    const std::map<std::string, double>& offsets);

struct ProjectedLocations {
    std::vector<Detection2D> detections;
    int dropped = 0;
};

/// Projects RF fixes into the pixel plane (source = rf_projected, device label
/// carried through); fixes behind the camera or out of frame are dropped and
/// counted.
ProjectedLocations project_rf_locations(const std::vector<RFLocation>& locations,
                                        const CameraModel& cam);

struct StepDiagnostics {
    int covariance_repairs = 0;
    std::vector<double> nis;  // one entry per assigned update this step
};

/// One predict-gate-associate-update cycle over all detections at one epoch.
/// Unassigned detections spawn tentative tracks (ids from next_track_id);
/// tracks miss-counted and deleted per config. Deleted tracks are retained in
/// the returned list with status = deleted so callers can archive them.
std::vector<TrackState> track_step(std::vector<TrackState> tracks,
                                   const std::vector<Detection2D>& detections,
                                   const FusionConfig& cfg, double dt, int& next_track_id,
                                   StepDiagnostics* diag = nullptr);

/// Transfers device labels from RF-projected detections to the nearest track
/// within radius_px. Labels are sticky: provenance upgrades to rf_fingerprint
/// and never downgrades; conflicting labels are resolved majority-by-count.
void assign_device_labels(std::vector<TrackState>& tracks,
                          const std::vector<Detection2D>& rf_detections, double radius_px);

}  // namespace simtrack
