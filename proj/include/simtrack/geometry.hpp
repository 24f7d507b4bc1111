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
#include <vector>

namespace simtrack {

/// Pinhole camera in the row-vector convention
///
///     w * [u v 1] = [X Y Z 1] * [R; T] * K
///
/// where [R; T] stacks the 3x3 rotation on top of the 1x3 translation row and
/// K's last column is (0, 0, 1)^T with the principal point in its third row.
/// The equivalent column convention is P = K^T * [R^T | T^T] acting on column
/// vectors; all internals use the row form.
struct CameraModel {
    Eigen::Matrix3d intrinsic = Eigen::Matrix3d::Identity();
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::RowVector3d translation = Eigen::RowVector3d::Zero();
    int image_width = 0;
    int image_height = 0;

    /// Throws InvalidArgument if R is not orthonormal (max deviation 1e-9),
    /// K has non-positive focals or a last column != (0,0,1)^T.
    void validate() const;
};

/// Position in the scenario's local ENU frame (meters), origin at the camera.
struct WorldPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Eigen::RowVector3d row() const { return {x, y, z}; }
    static WorldPoint from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
};

/// Continuous pixel coordinates; in_frame <=> 0 <= u < width && 0 <= v < height.
struct PixelPoint {
    double u = 0.0;
    double v = 0.0;
    bool in_frame = false;
};

/// Projects a world point through the camera. Throws DegenerateProjection when
/// the homogeneous scale |w| <= 1e-12 and BehindCamera when w < 0.
PixelPoint project_world_to_pixel(const WorldPoint& p, const CameraModel& cam);

struct Correspondence {
    WorldPoint world;
    PixelPoint pixel;
};

struct ExtrinsicCalibration {
    Eigen::Matrix3d rotation;
    Eigen::RowVector3d translation;
    double mean_reprojection_error_px = 0.0;
};

/// Direct Linear Transform estimation of (R, T) given the intrinsic matrix,
/// followed by projection of the rotation block onto the nearest orthonormal
/// matrix and an optional Gauss-Newton refinement of the reprojection error.
/// Requires >= 6 correspondences; throws RankDeficientGeometry when the DLT
/// system is numerically rank-deficient (e.g. collinear points).
ExtrinsicCalibration calibrate_extrinsics(const std::vector<Correspondence>& correspondences,
                                          const Eigen::Matrix3d& intrinsic, bool refine = true);

}  // namespace simtrack
