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

#include "simtrack/eo_detection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "simtrack/errors.hpp"
#include "simtrack/io.hpp"

namespace simtrack {

const char* to_string(Contrast c) { return c == Contrast::positive ? "positive" : "negative"; }

const char* to_string(DetectionSource s) {
    switch (s) {
        case DetectionSource::eo_rpca: return "eo_rpca";
        case DetectionSource::eo_external: return "eo_external";
        case DetectionSource::rf_projected: return "rf_projected";
    }
    return "eo_rpca";
}

Contrast contrast_from_string(const std::string& s) {
    if (s == "positive") return Contrast::positive;
    if (s == "negative") return Contrast::negative;
    throw ParseError("unknown contrast '" + s + "'");
}

DetectionSource source_from_string(const std::string& s) {
    if (s == "eo_rpca") return DetectionSource::eo_rpca;
    if (s == "eo_external") return DetectionSource::eo_external;
    if (s == "rf_projected") return DetectionSource::rf_projected;
    throw ParseError("unknown detection source '" + s + "'");
}

void MaskParams::validate() const {
    if (!(k_sigma > 0.0)) throw InvalidArgument("k_sigma must be > 0");
    if (min_area < 1 || max_area < min_area) throw InvalidArgument("need 0 < min_area <= max_area");
    if (dedup_radius < 0.0) throw InvalidArgument("dedup_radius must be >= 0");
    if (abs_floor < 0.0) throw InvalidArgument("abs_floor must be >= 0");
}

namespace {

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    const std::size_t mid = n / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (n % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (v[mid - 1] + hi);
}

}  // namespace

std::vector<Detection2D> extract_detections(const Eigen::Ref<const Eigen::MatrixXd>& s_frame,
                                            double t, Contrast mode, const MaskParams& params) {
    params.validate();
    if (!s_frame.allFinite()) throw InvalidArgument("sparse frame has non-finite entries");
    const int rows = static_cast<int>(s_frame.rows());
    const int cols = static_cast<int>(s_frame.cols());
    if (rows == 0 || cols == 0) return {};

    std::vector<double> values(s_frame.data(), s_frame.data() + s_frame.size());
    const double med = median_of(values);
    for (double& v : values) v = std::abs(v - med);
    double sigma_rob = 1.4826 * median_of(values);

    if (sigma_rob == 0.0) {
        const double mn = s_frame.minCoeff();
        const double mx = s_frame.maxCoeff();
        if (mn == mx && mn != 0.0) {
            throw DegenerateFrame("all entries equal " + std::to_string(mn) +
                                  "; no contrast to threshold");
        }
        // Exactly-sparse frames (the usual RPCA output) defeat the global MAD:
        // more than half the entries are zero. The noise floor of interest is
        // then the spread of the nonzero support.
        std::vector<double> support;
        for (Eigen::Index i = 0; i < s_frame.size(); ++i) {
            const double v = *(s_frame.data() + i);
            if (v != 0.0) support.push_back(v);
        }
        if (!support.empty()) {
            const double smed = median_of(support);
            for (double& v : support) v = std::abs(v - smed);
            sigma_rob = 1.4826 * median_of(support);
        }
    }

    const double thresh = std::max(params.k_sigma * sigma_rob, params.abs_floor);
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask =
        mode == Contrast::positive ? (s_frame.array() > thresh).eval()
                                   : (s_frame.array() < -thresh).eval();

    // 8-connected component labeling by iterative flood fill.
    std::vector<int> labels(static_cast<std::size_t>(rows) * cols, -1);
    auto at = [cols](int r, int c) { return static_cast<std::size_t>(r) * cols + c; };
    std::vector<Detection2D> out;
    std::vector<std::pair<int, int>> stack;
    int next_label = 0;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!mask(r, c) || labels[at(r, c)] >= 0) continue;
            const int label = next_label++;
            stack.clear();
            stack.emplace_back(r, c);
            labels[at(r, c)] = label;
            double sum_u = 0.0, sum_v = 0.0, sum_abs = 0.0;
            int area = 0;
            while (!stack.empty()) {
                const auto [cr, cc] = stack.back();
                stack.pop_back();
                ++area;
                sum_u += cc;
                sum_v += cr;
                sum_abs += std::abs(s_frame(cr, cc));
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int nr = cr + dr;
                        const int nc = cc + dc;
                        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                        if (!mask(nr, nc) || labels[at(nr, nc)] >= 0) continue;
                        labels[at(nr, nc)] = label;
                        stack.emplace_back(nr, nc);
                    }
                }
            }
            if (area < params.min_area || area > params.max_area) continue;
            Detection2D d;
            d.t = t;
            d.u = sum_u / area;
            d.v = sum_v / area;
            d.area = area;
            d.contrast = mode;
            d.source = DetectionSource::eo_rpca;
            d.score = sum_abs / area;
            out.push_back(std::move(d));
        }
    }
    std::sort(out.begin(), out.end(), [](const Detection2D& a, const Detection2D& b) {
        if (a.v != b.v) return a.v < b.v;
        return a.u < b.u;
    });
    return out;
}

std::vector<Detection2D> fuse_contrast_detections(const std::vector<Detection2D>& pos,
                                                  const std::vector<Detection2D>& neg,
                                                  double dedup_radius) {
    if (!pos.empty() && !neg.empty() && pos.front().t != neg.front().t) {
        throw InvalidArgument("contrast lists must share a timestamp");
    }
    std::vector<Detection2D> all;
    all.reserve(pos.size() + neg.size());
    all.insert(all.end(), pos.begin(), pos.end());
    all.insert(all.end(), neg.begin(), neg.end());
    // Highest score wins a merge; ties resolve by (v, u, contrast) for a
    // stable deterministic order.
    std::stable_sort(all.begin(), all.end(), [](const Detection2D& a, const Detection2D& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.v != b.v) return a.v < b.v;
        if (a.u != b.u) return a.u < b.u;
        return static_cast<int>(a.contrast) < static_cast<int>(b.contrast);
    });
    std::vector<Detection2D> kept;
    const double r2 = dedup_radius * dedup_radius;
    for (const auto& d : all) {
        bool merged = false;
        for (const auto& k : kept) {
            const double du = d.u - k.u;
            const double dv = d.v - k.v;
            if (du * du + dv * dv <= r2) {
                merged = true;
                break;
            }
        }
        if (!merged) kept.push_back(d);
    }
    std::sort(kept.begin(), kept.end(), [](const Detection2D& a, const Detection2D& b) {
        if (a.v != b.v) return a.v < b.v;
        return a.u < b.u;
    });
    return kept;
}

ExternalDetections ingest_external_detections(const std::string& path, int image_width,
                                              int image_height) {
    std::ifstream in(path);
    if (!in) throw IOError("cannot open external detections file: " + path);
    ExternalDetections out;
    std::string line;
    int line_no = 0;
    bool have_label_col = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "t,u,v,score" && line != "t,u,v,score,label") {
                throw ParseError("line 1: expected header 't,u,v,score[,label]', got '" + line + "'");
            }
            have_label_col = line == "t,u,v,score,label";
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() < 4 || fields.size() > 5 || (!have_label_col && fields.size() == 5)) {
            throw ParseError("line " + std::to_string(line_no) + ": wrong field count");
        }
        Detection2D d;
        try {
            d.t = parse_double(fields[0]);
            d.u = parse_double(fields[1]);
            d.v = parse_double(fields[2]);
            d.score = parse_double(fields[3]);
        } catch (const ParseError&) {
            throw ParseError("line " + std::to_string(line_no) + ": malformed number");
        }
        if (fields.size() == 5) d.label = fields[4];
        d.source = DetectionSource::eo_external;
        if (d.u < 0.0 || d.u >= image_width || d.v < 0.0 || d.v >= image_height) {
            ++out.rejected;
            continue;
        }
        out.detections.push_back(std::move(d));
    }
    return out;
}

}  // namespace simtrack
