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

#include "simtrack/rf_preproc.hpp"

namespace simtrack {

inline constexpr double kSpeedOfLight = 299792458.0;

struct SensorLayout {
    struct Sensor {
        std::uint32_t id = 0;
        Eigen::Vector3d position = Eigen::Vector3d::Zero();
    };
    std::vector<Sensor> sensors;
    std::uint32_t reference_id = 0;

    void validate() const;
    const Sensor* find(std::uint32_t id) const;
    Eigen::Vector3d position_of(std::uint32_t id) const;
    double baseline(std::uint32_t a, std::uint32_t b) const;
};

/// delta_tau = arrival time at sensor_a minus arrival time at sensor_b.
struct TdoaMeasurement {
    std::uint32_t sensor_a = 0;
    std::uint32_t sensor_b = 0;
    double delta_tau = 0.0;
    double t = 0.0;
    double peak_quality = 1.0;
};

enum class LocalizationMethod { spherical_intersection, ml_constrained };
const char* to_string(LocalizationMethod m);

struct RFLocation {
    double t = 0.0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    LocalizationMethod method = LocalizationMethod::spherical_intersection;
    double residual = 0.0;  // paper objective value at the solution, seconds^2
    std::string device_label;
    bool converged = true;
    bool ambiguous = false;
    Eigen::Vector3d alternate = Eigen::Vector3d::Zero();  // runner-up basin when ambiguous
};

/// Cross-correlation TDOA with three-point parabolic sub-sample refinement.
/// The lag search is confined to +-max_lag; clock offsets are honored by
/// correlating the overlapping unified-time support of both captures. Throws
/// NoPeak when the peak-to-sidelobe quality falls below min_peak_quality.
TdoaMeasurement estimate_tdoa(const RFCapture& a, const RFCapture& b, double max_lag,
                              double min_peak_quality = 2.0);

/// Closed-form spherical-intersection (SX) solve: with range differences
/// d_i = c * delta_tau_i against a common reference sensor, position is linear
/// in the unknown reference range R_s, and substituting back gives a quadratic
/// in R_s. Of the real roots with R_s > 0, the one with the smaller
/// reprojected-TDOA residual wins. Needs >= 3 independent pairs (>= 4
/// sensors).
RFLocation spherical_intersection(const std::vector<TdoaMeasurement>& tdoas,
                                  const SensorLayout& layout);

struct AltitudePrior {
    double altitude = 0.0;
    double sigma_z = 10.0;  // meters; <= 0 pins z exactly
    double weight = 1.0;
};

/// Gauss-Newton minimization of
///   sum_i ((||r - r_i1|| - ||r - r_i2||)/c - delta_tau_i)^2 + altitude penalty
/// initialized by a 50 m coarse grid over the layout's surveillance box.
/// The altitude penalty is w_z * (tau_ref * (z - altitude)/sigma_z)^2 with
/// tau_ref = 1e-8 s so the prior competes on the TDOA residual scale.
RFLocation ml_localize(const std::vector<TdoaMeasurement>& tdoas, const SensorLayout& layout,
                       const AltitudePrior& prior);

/// The objective ml_localize minimizes (exposed for verification).
double ml_objective(const Eigen::Vector3d& r, const std::vector<TdoaMeasurement>& tdoas,
                    const SensorLayout& layout, const AltitudePrior& prior);

}  // namespace simtrack
