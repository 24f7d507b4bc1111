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
#include <string>
#include <vector>

namespace simtrack {

enum class Contrast { positive, negative };
enum class DetectionSource { eo_rpca, eo_external, rf_projected };

const char* to_string(Contrast c);
const char* to_string(DetectionSource s);
Contrast contrast_from_string(const std::string& s);
DetectionSource source_from_string(const std::string& s);

/// Timestamped pixel-plane detection. For eo_rpca detections (u, v) is the
/// connected-component centroid and score the mean |S| over the component.
struct Detection2D {
    double t = 0.0;
    double u = 0.0;
    double v = 0.0;
    int area = 0;
    Contrast contrast = Contrast::positive;
    DetectionSource source = DetectionSource::eo_rpca;
    double score = 0.0;
    std::string label;  // device label, empty when unknown
};

struct MaskParams {
    double k_sigma = 3.0;
    int min_area = 1;
    int max_area = 400;
    double dedup_radius = 5.0;
    // Absolute threshold floor. Exactly-sparse S carries numerical dust far
    // below one quantization step of the 8-bit input; a MAD-relative threshold
    // alone would always keep the top tail of that dust.
    double abs_floor = 1.0 / 255.0;

    void validate() const;
};

/// Thresholds a sparse-component frame at k_sigma times the MAD-based robust
/// sigma (1.4826 * median |S - median S|) and extracts 8-connected components
/// with min_area <= area <= max_area, ordered by centroid (v, u).
///
/// A frame whose entries are all equal and nonzero carries no contrast to
/// threshold and raises DegenerateFrame. When sigma_rob is zero but the frame
/// is not constant (the usual case for exactly-sparse S), the threshold
/// degrades to zero and any strictly positive (resp. negative) pixel is
/// foreground.
std::vector<Detection2D> extract_detections(const Eigen::Ref<const Eigen::MatrixXd>& s_frame,
                                            double t, Contrast mode, const MaskParams& params);

/// Union of the two per-contrast lists; any pair of detections within
/// dedup_radius collapses to the higher-score member. Deterministic.
std::vector<Detection2D> fuse_contrast_detections(const std::vector<Detection2D>& pos,
                                                  const std::vector<Detection2D>& neg,
                                                  double dedup_radius);

struct ExternalDetections {
    std::vector<Detection2D> detections;
    int rejected = 0;
};

/// Reads a CSV with header t,u,v,score[,label]; rows projecting outside
/// [0,width) x [0,height) are rejected and counted. Throws ParseError with the
/// offending line number.
ExternalDetections ingest_external_detections(const std::string& path, int image_width,
                                              int image_height);

}  // namespace simtrack
