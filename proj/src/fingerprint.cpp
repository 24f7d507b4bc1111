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

#include "simtrack/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "simtrack/dsp.hpp"
#include "simtrack/errors.hpp"
#include "simtrack/io.hpp"

namespace simtrack {

namespace {

constexpr int kSpectrumBins = 128;
constexpr int kEnvelopeSmooth = 16;

// Variance floors keep z-scores finite when a class trains on near-identical
// vectors: (1 - corr), log-spectral RMS, seconds, Hz.
const Eigen::Vector4d kVarFloor(1e-4 * 1e-4, 1e-3 * 1e-3, 8e-6 * 8e-6, 400.0 * 400.0);

Eigen::VectorXd smoothed_envelope(const Eigen::VectorXcd& iq) {
    const int n = static_cast<int>(iq.size());
    Eigen::VectorXd env(n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += std::abs(iq(i));
        if (i >= kEnvelopeSmooth) acc -= std::abs(iq(i - kEnvelopeSmooth));
        env(i) = acc / std::min(i + 1, kEnvelopeSmooth);
    }
    const double peak = env.maxCoeff();
    if (peak > 0.0) env /= peak;
    return env;
}

}  // namespace

bool ClassSet::contains(const std::string& l) const {
    return std::find(labels.begin(), labels.end(), l) != labels.end();
}

void ClassSet::validate() const {
    if (labels.empty()) throw InvalidArgument("class set must be non-empty");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            if (labels[i] == labels[j]) throw InvalidArgument("duplicate label " + labels[i]);
        }
    }
}

std::string ConfidenceVector::argmax() const {
    std::string best;
    double best_v = -1.0;
    for (const auto& [label, v] : conf) {
        if (v > best_v) {
            best_v = v;
            best = label;
        }
    }
    return best;
}

FingerprintFeatures extract_features(const FingerprintVector& v) {
    if (v.iq.size() != kFingerprintLength) {
        throw InvalidArgument("fingerprint vector must have length 2600");
    }
    FingerprintFeatures f;
    f.envelope = smoothed_envelope(v.iq);

    // Power-normalized log spectrum; normalization makes it scale-invariant.
    Eigen::VectorXd psd = welch_psd(v.iq, 2 * kSpectrumBins);
    Eigen::VectorXd folded(kSpectrumBins);
    for (int i = 0; i < kSpectrumBins; ++i) folded(i) = psd(2 * i) + psd(2 * i + 1);
    const double total = folded.sum();
    if (total > 0.0) folded /= total;
    f.log_spectrum = (folded.array() + 1e-12).log10();

    // 10-90% rise time of the smoothed envelope, measured against the steady
    // on-level (75th percentile) so modulation ripple above it cannot push the
    // crossing into the burst interior.
    {
        std::vector<double> sorted(f.envelope.data(), f.envelope.data() + f.envelope.size());
        std::nth_element(sorted.begin(), sorted.begin() + sorted.size() * 3 / 4, sorted.end());
        const double steady = sorted[sorted.size() * 3 / 4];
        int i10 = -1, i90 = -1;
        for (int i = 0; i < f.envelope.size(); ++i) {
            if (i10 < 0 && f.envelope(i) >= 0.1 * steady) i10 = i;
            if (i10 >= 0 && f.envelope(i) >= 0.9 * steady) {
                i90 = i;
                break;
            }
        }
        f.rise_time = (i10 >= 0 && i90 >= i10) ? (i90 - i10) / v.fs : 0.0;
    }

    // 99% occupied bandwidth.
    const double bin_hz = v.fs / (2 * kSpectrumBins);
    double cum = 0.0;
    int lo = 0, hi = kSpectrumBins - 1;
    for (int i = 0; i < kSpectrumBins; ++i) {
        cum += folded(i);
        if (cum <= 0.005) lo = i;
        if (cum < 0.995) hi = i;
    }
    f.occupied_bw = std::max(1, hi - lo + 1) * 2.0 * bin_hz;
    return f;
}

namespace {

Eigen::Vector4d feature_distance(const FingerprintFeatures& f, const ClassTemplate& tpl) {
    const double denom = f.envelope.norm() * tpl.mean_envelope.norm();
    const double corr = denom > 0.0 ? f.envelope.dot(tpl.mean_envelope) / denom : 0.0;
    Eigen::Vector4d d;
    d(0) = 1.0 - corr;
    d(1) = std::sqrt((f.log_spectrum - tpl.mean_log_spectrum).squaredNorm() /
                     static_cast<double>(kSpectrumBins));
    d(2) = f.rise_time;
    d(3) = f.occupied_bw;
    return d;
}

}  // namespace

ClassTemplates train_templates(const std::vector<FingerprintVector>& data, int min_per_label,
                               double conf_scale) {
    std::vector<const FingerprintVector*> sorted;
    sorted.reserve(data.size());
    for (const auto& v : data) {
        if (v.device_truth.empty()) throw InvalidArgument("training vector without device_truth");
        if (v.iq.size() != kFingerprintLength) {
            throw InvalidArgument("training vector must have length 2600");
        }
        sorted.push_back(&v);
    }
    std::sort(sorted.begin(), sorted.end(), [](const FingerprintVector* a, const FingerprintVector* b) {
        if (a->device_truth != b->device_truth) return a->device_truth < b->device_truth;
        return a->window_t < b->window_t;
    });

    ClassTemplates out;
    out.conf_scale = conf_scale;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j]->device_truth == sorted[i]->device_truth) ++j;
        const int count = static_cast<int>(j - i);
        if (count < min_per_label) {
            throw InsufficientData("label " + sorted[i]->device_truth + " has " +
                                   std::to_string(count) + " vectors, needs " +
                                   std::to_string(min_per_label));
        }

        ClassTemplate tpl;
        tpl.label = sorted[i]->device_truth;
        tpl.count = count;
        std::vector<FingerprintFeatures> feats;
        feats.reserve(count);
        tpl.mean_envelope = Eigen::VectorXd::Zero(kFingerprintLength);
        tpl.mean_log_spectrum = Eigen::VectorXd::Zero(kSpectrumBins);
        for (std::size_t k = i; k < j; ++k) {
            feats.push_back(extract_features(*sorted[k]));
            tpl.mean_envelope += feats.back().envelope;
            tpl.mean_log_spectrum += feats.back().log_spectrum;
            tpl.mean_rise_time += feats.back().rise_time;
            tpl.mean_obw += feats.back().occupied_bw;
        }
        tpl.mean_envelope /= count;
        tpl.mean_log_spectrum /= count;
        tpl.mean_rise_time /= count;
        tpl.mean_obw /= count;

        Eigen::Vector4d mean = Eigen::Vector4d::Zero();
        for (const auto& f : feats) mean += feature_distance(f, tpl);
        mean /= count;
        Eigen::Vector4d var = Eigen::Vector4d::Zero();
        for (const auto& f : feats) {
            const Eigen::Vector4d d = feature_distance(f, tpl) - mean;
            var += d.cwiseProduct(d);
        }
        var /= std::max(1, count - 1);
        tpl.feature_mean = mean;
        tpl.feature_var = var.cwiseMax(kVarFloor);
        out.classes.push_back(std::move(tpl));
        i = j;
    }
    if (out.classes.empty()) throw InsufficientData("no labeled vectors supplied");
    return out;
}

const ClassTemplate* ClassTemplates::find(const std::string& label) const {
    for (const auto& c : classes) {
        if (c.label == label) return &c;
    }
    return nullptr;
}

ConfidenceVector classify(const FingerprintVector& v, const ClassTemplates& templates) {
    if (v.iq.size() != kFingerprintLength) {
        throw InvalidArgument("fingerprint vector must have length 2600");
    }
    const FingerprintFeatures f = extract_features(v);
    ConfidenceVector out;
    out.t = v.window_t;
    const double kappa2 = templates.conf_scale * templates.conf_scale;
    for (const auto& tpl : templates.classes) {
        const Eigen::Vector4d d = feature_distance(f, tpl) - tpl.feature_mean;
        const Eigen::Vector4d z2 = d.cwiseProduct(d).cwiseQuotient(tpl.feature_var);
        const double dbar2 = z2.mean();
        out.conf[tpl.label] = std::exp(-dbar2 / (2.0 * kappa2));
    }
    return out;
}

std::map<std::string, double> average_confidence(const std::vector<ConfidenceVector>& stream) {
    if (stream.empty()) throw EmptyStream("no confidence vectors to average");
    std::map<std::string, double> acc;
    std::map<std::string, int> counts;
    for (const auto& cv : stream) {
        for (const auto& [label, v] : cv.conf) {
            acc[label] += v;
            counts[label] += 1;
        }
    }
    for (auto& [label, v] : acc) v /= counts[label];
    return acc;
}

ExternalConfidences ingest_external_confidences(const std::string& path, const ClassSet& classes) {
    classes.validate();
    std::ifstream in(path);
    if (!in) throw IOError("cannot open confidence file: " + path);
    ExternalConfidences out;
    std::string line;
    int line_no = 0;
    std::vector<std::string> cols;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (line_no == 1) {
            if (fields.empty() || fields[0] != "t") {
                throw ParseError("line 1: header must start with 't'");
            }
            cols.assign(fields.begin() + 1, fields.end());
            for (const auto& c : cols) {
                if (!classes.contains(c)) throw ParseError("line 1: unknown class '" + c + "'");
            }
            continue;
        }
        if (fields.size() != cols.size() + 1) {
            throw ParseError("line " + std::to_string(line_no) + ": wrong field count");
        }
        ConfidenceVector cv;
        try {
            cv.t = parse_double(fields[0]);
            for (std::size_t c = 0; c < cols.size(); ++c) {
                double v = parse_double(fields[c + 1]);
                if (v < 0.0 || v > 1.0) {
                    ++out.clamped;
                    v = std::clamp(v, 0.0, 1.0);
                }
                cv.conf[cols[c]] = v;
            }
        } catch (const ParseError&) {
            throw ParseError("line " + std::to_string(line_no) + ": malformed number");
        }
        out.confidences.push_back(std::move(cv));
    }
    std::stable_sort(out.confidences.begin(), out.confidences.end(),
                     [](const ConfidenceVector& a, const ConfidenceVector& b) { return a.t < b.t; });
    return out;
}

namespace {

void write_bytes(std::ofstream& f, const void* p, std::size_t n) {
    f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& f, void* p, std::size_t n) {
    if (!f.read(static_cast<char*>(p), static_cast<std::streamsize>(n))) {
        throw IOError("template store truncated");
    }
}

void write_vec(std::ofstream& f, const Eigen::VectorXd& v) {
    const std::uint64_t n = static_cast<std::uint64_t>(v.size());
    write_bytes(f, &n, sizeof n);
    write_bytes(f, v.data(), sizeof(double) * n);
}

Eigen::VectorXd read_vec(std::ifstream& f) {
    std::uint64_t n = 0;
    read_bytes(f, &n, sizeof n);
    if (n > (1u << 24)) throw IOError("template store corrupt (vector too long)");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    read_bytes(f, v.data(), sizeof(double) * n);
    return v;
}

constexpr char kTemplateMagic[8] = {'S', 'T', 'F', 'P', 'T', 'P', 'L', '\0'};
constexpr std::uint32_t kTemplateVersion = 1;

}  // namespace

void ClassTemplates::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IOError("cannot write template store: " + path);
    write_bytes(f, kTemplateMagic, sizeof kTemplateMagic);
    write_bytes(f, &kTemplateVersion, sizeof kTemplateVersion);
    const std::uint32_t n = static_cast<std::uint32_t>(classes.size());
    write_bytes(f, &n, sizeof n);
    write_bytes(f, &conf_scale, sizeof conf_scale);
    for (const auto& c : classes) {
        const std::uint32_t len = static_cast<std::uint32_t>(c.label.size());
        write_bytes(f, &len, sizeof len);
        write_bytes(f, c.label.data(), len);
        write_vec(f, c.mean_envelope);
        write_vec(f, c.mean_log_spectrum);
        write_bytes(f, &c.mean_rise_time, sizeof c.mean_rise_time);
        write_bytes(f, &c.mean_obw, sizeof c.mean_obw);
        Eigen::VectorXd fm = c.feature_mean;
        Eigen::VectorXd fv = c.feature_var;
        write_vec(f, fm);
        write_vec(f, fv);
        const std::int32_t count = c.count;
        write_bytes(f, &count, sizeof count);
    }
}

ClassTemplates ClassTemplates::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IOError("cannot open template store: " + path);
    char magic[8];
    read_bytes(f, magic, sizeof magic);
    if (std::memcmp(magic, kTemplateMagic, sizeof magic) != 0) {
        throw IOError("bad template store magic in " + path);
    }
    std::uint32_t version = 0, n = 0;
    read_bytes(f, &version, sizeof version);
    if (version != kTemplateVersion) {
        throw IOError("unsupported template store version " + std::to_string(version));
    }
    read_bytes(f, &n, sizeof n);
    ClassTemplates out;
    read_bytes(f, &out.conf_scale, sizeof out.conf_scale);
    for (std::uint32_t i = 0; i < n; ++i) {
        ClassTemplate c;
        std::uint32_t len = 0;
        read_bytes(f, &len, sizeof len);
        if (len > 256) throw IOError("template store corrupt (label too long)");
        c.label.resize(len);
        read_bytes(f, c.label.data(), len);
        c.mean_envelope = read_vec(f);
        c.mean_log_spectrum = read_vec(f);
        read_bytes(f, &c.mean_rise_time, sizeof c.mean_rise_time);
        read_bytes(f, &c.mean_obw, sizeof c.mean_obw);
        c.feature_mean = read_vec(f);
        c.feature_var = read_vec(f);
        std::int32_t count = 0;
        read_bytes(f, &count, sizeof count);
        c.count = count;
        out.classes.push_back(std::move(c));
    }
    return out;
}

}  // namespace simtrack
