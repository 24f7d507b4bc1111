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

#include "simtrack/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "simtrack/errors.hpp"
#include "simtrack/hungarian.hpp"

namespace simtrack {

const char* to_string(TrackStatus s) {
    switch (s) {
        case TrackStatus::tentative: return "tentative";
        case TrackStatus::confirmed: return "confirmed";
        case TrackStatus::deleted: return "deleted";
    }
    return "tentative";
}

const char* to_string(LabelProvenance p) {
    switch (p) {
        case LabelProvenance::none: return "none";
        case LabelProvenance::hungarian_notional: return "hungarian_notional";
        case LabelProvenance::rf_fingerprint: return "rf_fingerprint";
    }
    return "none";
}

void FusionConfig::validate() const {
    if (!(gate > 0.0) || !(q > 0.0) || !(r_eo > 0.0) || !(r_rf > 0.0)) {
        throw InvalidArgument("fusion gate/q/r_eo/r_rf must be positive");
    }
    if (m_confirm < 1 || confirm_window < m_confirm || n_miss < 1) {
        throw InvalidArgument("fusion confirmation/deletion counts invalid");
    }
    for (const auto& [k, v] : offsets) {
        if (!std::isfinite(v)) throw InvalidArgument("offset for '" + k + "' must be finite");
    }
}

namespace {

int source_rank(DetectionSource s) {
    switch (s) {
        case DetectionSource::eo_rpca: return 0;
        case DetectionSource::eo_external: return 1;
        case DetectionSource::rf_projected: return 2;
    }
    return 0;
}

void repair_covariance(Eigen::Matrix4d& p, StepDiagnostics* diag) {
    p = 0.5 * (p + p.transpose()).eval();
    Eigen::LLT<Eigen::Matrix4d> llt(p);
    int attempts = 0;
    while (llt.info() != Eigen::Success && attempts < 4) {
        p += Eigen::Matrix4d::Identity() * 1e-9 * std::max(1.0, p.diagonal().maxCoeff());
        llt.compute(p);
        ++attempts;
        if (diag != nullptr) ++diag->covariance_repairs;
    }
}

void record_epoch(TrackState& t, bool hit, const FusionConfig& cfg) {
    t.recent.push_back(hit);
    while (static_cast<int>(t.recent.size()) > cfg.confirm_window) t.recent.pop_front();
    if (hit) {
        ++t.hits;
        t.consecutive_misses = 0;
    } else {
        ++t.misses;
        ++t.consecutive_misses;
    }
    if (t.status == TrackStatus::tentative) {
        const int recent_hits = static_cast<int>(std::count(t.recent.begin(), t.recent.end(), true));
        if (recent_hits >= cfg.m_confirm) t.status = TrackStatus::confirmed;
    }
    if (t.consecutive_misses >= cfg.n_miss) t.status = TrackStatus::deleted;
}

}  // namespace

std::vector<Detection2D> align_timeline(
    const std::vector<std::pair<std::string, std::vector<Detection2D>>>& streams,
    const std::map<std::string, double>& offsets) {
    std::vector<Detection2D> merged;
    for (const auto& [source, detections] : streams) {
        const auto it = offsets.find(source);
        if (it == offsets.end()) {
            throw MissingOffset("no timeline offset configured for source '" + source + "'");
        }
        for (Detection2D d : detections) {
            d.t -= it->second;
            merged.push_back(std::move(d));
        }
    }
    std::stable_sort(merged.begin(), merged.end(), [](const Detection2D& a, const Detection2D& b) {
        if (a.t != b.t) return a.t < b.t;
        return source_rank(a.source) < source_rank(b.source);
    });
    return merged;
}

ProjectedLocations project_rf_locations(const std::vector<RFLocation>& locations,
                                        const CameraModel& cam) {
    cam.validate();
    ProjectedLocations out;
    for (const auto& loc : locations) {
        PixelPoint px;
        try {
            px = project_world_to_pixel(WorldPoint::from(loc.position), cam);
        } catch (const Error&) {
            ++out.dropped;
            continue;
        }
        if (!px.in_frame) {
            ++out.dropped;
            continue;
        }
        Detection2D d;
        d.t = loc.t;
        d.u = px.u;
        d.v = px.v;
        d.source = DetectionSource::rf_projected;
        d.score = 1.0;
        d.label = loc.device_label;
        out.detections.push_back(std::move(d));
    }
    return out;
}

std::vector<TrackState> track_step(std::vector<TrackState> tracks,
                                   const std::vector<Detection2D>& detections,
                                   const FusionConfig& cfg, double dt, int& next_track_id,
                                   StepDiagnostics* diag) {
    cfg.validate();
    if (!(dt > 0.0)) throw InvalidArgument("track_step requires dt > 0");

    Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
    f(0, 2) = dt;
    f(1, 3) = dt;
    const double dt2 = dt * dt;
    const double dt3 = dt2 * dt;
    Eigen::Matrix4d qm = Eigen::Matrix4d::Zero();
    qm(0, 0) = qm(1, 1) = cfg.q * dt3 / 3.0;
    qm(0, 2) = qm(2, 0) = qm(1, 3) = qm(3, 1) = cfg.q * dt2 / 2.0;
    qm(2, 2) = qm(3, 3) = cfg.q * dt;
    Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
    h(0, 0) = 1.0;
    h(1, 1) = 1.0;

    std::vector<TrackState*> active;
    for (auto& t : tracks) {
        if (t.status == TrackStatus::deleted) continue;
        t.state = f * t.state;
        t.covariance = f * t.covariance * f.transpose() + qm;
        repair_covariance(t.covariance, diag);
        active.push_back(&t);
    }

    const int nt = static_cast<int>(active.size());
    const int nd = static_cast<int>(detections.size());
    std::vector<Eigen::Matrix2d> innovation_cov(static_cast<std::size_t>(nt) * std::max(nd, 1));
    Eigen::MatrixXd cost(nt, nd);
    for (int i = 0; i < nt; ++i) {
        for (int j = 0; j < nd; ++j) {
            const double r = detections[j].source == DetectionSource::rf_projected ? cfg.r_rf
                                                                                   : cfg.r_eo;
            Eigen::Matrix2d s = h * active[i]->covariance * h.transpose();
            s(0, 0) += r * r;
            s(1, 1) += r * r;
            innovation_cov[static_cast<std::size_t>(i) * nd + j] = s;
            Eigen::Vector2d y(detections[j].u - active[i]->state(0),
                              detections[j].v - active[i]->state(1));
            cost(i, j) = y.dot(s.llt().solve(y));
        }
    }

    Assignment assignment = nd > 0 && nt > 0 ? hungarian_assign(cost, cfg.gate) : Assignment{};
    std::vector<char> det_used(nd, false);
    std::vector<char> track_hit(nt, false);

    for (const auto& [i, j] : assignment.pairs) {
        TrackState& t = *active[i];
        const Eigen::Matrix2d& s = innovation_cov[static_cast<std::size_t>(i) * nd + j];
        Eigen::Vector2d y(detections[j].u - t.state(0), detections[j].v - t.state(1));
        const double nis = y.dot(s.llt().solve(y));
        Eigen::Matrix<double, 4, 2> k = t.covariance * h.transpose() * s.inverse();
        t.state += k * y;
        Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - k * h;
        const double r = detections[j].source == DetectionSource::rf_projected ? cfg.r_rf : cfg.r_eo;
        // Joseph form keeps the update symmetric positive-definite.
        t.covariance = ikh * t.covariance * ikh.transpose() +
                       k * (r * r * Eigen::Matrix2d::Identity()) * k.transpose();
        repair_covariance(t.covariance, diag);
        t.last_nis = nis;
        if (diag != nullptr) diag->nis.push_back(nis);
        if (t.provenance == LabelProvenance::none) {
            t.provenance = LabelProvenance::hungarian_notional;
        }
        det_used[j] = true;
        track_hit[i] = true;
    }

    for (int i = 0; i < nt; ++i) record_epoch(*active[i], track_hit[i], cfg);

    for (int j = 0; j < nd; ++j) {
        if (det_used[j]) continue;
        const double r = detections[j].source == DetectionSource::rf_projected ? cfg.r_rf : cfg.r_eo;
        TrackState t;
        t.track_id = next_track_id++;
        t.state << detections[j].u, detections[j].v, 0.0, 0.0;
        t.covariance.setZero();
        t.covariance(0, 0) = t.covariance(1, 1) = r * r;
        t.covariance(2, 2) = t.covariance(3, 3) = cfg.spawn_velocity_std * cfg.spawn_velocity_std;
        t.status = TrackStatus::tentative;
        t.recent.push_back(true);
        t.hits = 1;
        tracks.push_back(std::move(t));
    }
    return tracks;
}

void assign_device_labels(std::vector<TrackState>& tracks,
                          const std::vector<Detection2D>& rf_detections, double radius_px) {
    for (const auto& d : rf_detections) {
        if (d.source != DetectionSource::rf_projected || d.label.empty()) continue;
        TrackState* best = nullptr;
        double best_dist = radius_px;
        for (auto& t : tracks) {
            if (t.status == TrackStatus::deleted) continue;
            const double dist = std::hypot(t.state(0) - d.u, t.state(1) - d.v);
            if (dist <= best_dist) {
                best_dist = dist;
                best = &t;
            }
        }
        if (best == nullptr) continue;
        best->label_votes[d.label] += 1;
        // majority-by-count; ties keep the incumbent label
        int best_votes = 0;
        std::string winner = best->device_label;
        for (const auto& [label, votes] : best->label_votes) {
            if (votes > best_votes || (votes == best_votes && label == best->device_label)) {
                best_votes = votes;
                winner = label;
            }
        }
        best->device_label = winner;
        best->provenance = LabelProvenance::rf_fingerprint;
    }
}

}  // namespace simtrack
