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
#include <map>
#include <string>
#include <vector>

#include "simtrack/rf_preproc.hpp"

namespace simtrack {

struct ClassSet {
    std::vector<std::string> labels;

    static ClassSet default_set() { return {{"IF1200", "Mavic", "Phantom", "m600"}}; }
    bool contains(const std::string& l) const;
    void validate() const;
};

/// Per-class confidence in [0, 1]. The vector is not required to sum to 1.
struct ConfidenceVector {
    double t = 0.0;
    std::map<std::string, double> conf;

    std::string argmax() const;
};

/// Template statistics per device class. Classification scores a vector by a
/// normalized distance over four transmitter-impairment features: envelope
/// correlation against the class mean, log-spectral distance, 10-90% rise
/// time, and occupied bandwidth. All features are amplitude-normalized.
struct ClassTemplate {
    std::string label;
    Eigen::VectorXd mean_envelope;      // length 2600, peak-normalized
    Eigen::VectorXd mean_log_spectrum;  // 128 bins, power-normalized
    double mean_rise_time = 0.0;        // seconds
    double mean_obw = 0.0;              // Hz
    Eigen::Vector4d feature_mean = Eigen::Vector4d::Zero();
    Eigen::Vector4d feature_var = Eigen::Vector4d::Ones();
    int count = 0;
};

struct ClassTemplates {
    std::vector<ClassTemplate> classes;
    double conf_scale = 3.0;  // kappa in conf = exp(-dbar^2 / (2 kappa^2))

    const ClassTemplate* find(const std::string& label) const;
    void save(const std::string& path) const;
    static ClassTemplates load(const std::string& path);
};

struct FingerprintFeatures {
    Eigen::VectorXd envelope;
    Eigen::VectorXd log_spectrum;
    double rise_time = 0.0;
    double occupied_bw = 0.0;
};

FingerprintFeatures extract_features(const FingerprintVector& v);

/// Requires >= min_per_label vectors for every label present (default 50).
/// Reductions are sorted by (label, window_t) first, so the result does not
/// depend on input order.
ClassTemplates train_templates(const std::vector<FingerprintVector>& data, int min_per_label = 50,
                               double conf_scale = 3.0);

ConfidenceVector classify(const FingerprintVector& v, const ClassTemplates& templates);

/// Arithmetic mean per label over the stream; throws EmptyStream.
std::map<std::string, double> average_confidence(const std::vector<ConfidenceVector>& stream);

struct ExternalConfidences {
    std::vector<ConfidenceVector> confidences;
    int clamped = 0;
};

/// CSV with header t,<label>,... ; values clamped to [0,1] (count reported),
/// rows sorted by t.
ExternalConfidences ingest_external_confidences(const std::string& path, const ClassSet& classes);

}  // namespace simtrack
