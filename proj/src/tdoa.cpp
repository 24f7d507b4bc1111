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

#include "simtrack/tdoa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "simtrack/dsp.hpp"
#include "simtrack/errors.hpp"

namespace simtrack {

void SensorLayout::validate() const {
    if (sensors.size() < 2) throw InvalidArgument("layout needs >= 2 sensors");
    for (std::size_t i = 0; i < sensors.size(); ++i) {
        for (std::size_t j = i + 1; j < sensors.size(); ++j) {
            if (sensors[i].id == sensors[j].id) {
                throw InvalidArgument("duplicate sensor id " + std::to_string(sensors[i].id));
            }
            if ((sensors[i].position - sensors[j].position).norm() < 1e-9) {
                throw InvalidArgument("sensors " + std::to_string(sensors[i].id) + " and " +
                                      std::to_string(sensors[j].id) + " share a position");
            }
        }
    }
    if (find(reference_id) == nullptr) {
        throw InvalidArgument("reference sensor " + std::to_string(reference_id) +
                              " not in layout");
    }
}

const SensorLayout::Sensor* SensorLayout::find(std::uint32_t id) const {
    for (const auto& s : sensors) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

Eigen::Vector3d SensorLayout::position_of(std::uint32_t id) const {
    const Sensor* s = find(id);
    if (s == nullptr) throw InvalidArgument("unknown sensor id " + std::to_string(id));
    return s->position;
}

double SensorLayout::baseline(std::uint32_t a, std::uint32_t b) const {
    return (position_of(a) - position_of(b)).norm();
}

const char* to_string(LocalizationMethod m) {
    return m == LocalizationMethod::spherical_intersection ? "spherical_intersection"
                                                           : "ml_constrained";
}

TdoaMeasurement estimate_tdoa(const RFCapture& a, const RFCapture& b, double max_lag,
                              double min_peak_quality) {
    a.validate();
    b.validate();
    if (std::abs(a.fs - b.fs) > 1e-6) throw InvalidArgument("captures must share sample rate");
    const double fs = a.fs;
    if (!(max_lag > 0.0)) throw InvalidArgument("max_lag must be > 0");

    // Overlapping support on the unified timeline.
    const double start = std::max(a.unified_start(), b.unified_start());
    const double end = std::min(a.unified_end(), b.unified_end());
    if (end - start <= 2.0 / fs) {
        throw InvalidArgument("captures have no overlapping time support");
    }
    const auto slice_from = [&](const RFCapture& c, Eigen::Index* idx0, double* slice_start) {
        const double offset_samples = (start - c.unified_start()) * fs;
        *idx0 = static_cast<Eigen::Index>(std::ceil(offset_samples - 1e-9));
        if (*idx0 < 0) *idx0 = 0;
        *slice_start = c.unified_start() + *idx0 / fs;
    };
    Eigen::Index ia0 = 0, ib0 = 0;
    double ta0 = 0.0, tb0 = 0.0;
    slice_from(a, &ia0, &ta0);
    slice_from(b, &ib0, &tb0);
    const Eigen::Index len = std::min(a.samples.size() - ia0, b.samples.size() - ib0);
    if (len < 8) throw InvalidArgument("overlap too short for correlation");

    const int lag_max = std::max(1, static_cast<int>(std::ceil(max_lag * fs))) + 1;
    const auto xa = a.samples.segment(ia0, len);
    const auto xb = b.samples.segment(ib0, len);

    // R(l) = sum_n a(n) conj(b(n - l)); |R| peaks where a's content lags b's.
    Eigen::VectorXd mag(2 * lag_max + 1);
    for (int l = -lag_max; l <= lag_max; ++l) {
        const Eigen::Index n0 = std::max<Eigen::Index>(0, l);
        const Eigen::Index n1 = std::min<Eigen::Index>(len, len + l);
        const Eigen::Index count = n1 - n0;
        std::complex<double> acc(0.0, 0.0);
        if (count > 0) acc = xa.segment(n0, count).dot(xb.segment(n0 - l, count));
        // Eigen's dot conjugates the *first* argument; flip to a(n) conj(b(..)).
        mag(l + lag_max) = std::abs(std::conj(acc));
    }

    Eigen::Index peak_idx = 0;
    const double peak = mag.maxCoeff(&peak_idx);
    if (!(peak > 0.0)) throw NoPeak("correlation is identically zero");

    // peak-to-sidelobe quality: exclude 3x the main-lobe half width
    int lobe = 1;
    while (peak_idx - lobe >= 0 && peak_idx + lobe < mag.size() &&
           std::max(mag(peak_idx - lobe), mag(peak_idx + lobe)) > 0.37 * peak) {
        ++lobe;
    }
    const int exclusion = 3 * lobe;
    double side = 0.0;
    for (Eigen::Index i = 0; i < mag.size(); ++i) {
        if (std::abs(i - peak_idx) <= exclusion) continue;
        side = std::max(side, mag(i));
    }
    const double quality = side > 0.0 ? peak / side : std::numeric_limits<double>::infinity();
    if (quality < min_peak_quality) {
        throw NoPeak("peak-to-sidelobe " + std::to_string(quality) + " below " +
                     std::to_string(min_peak_quality));
    }

    double refined = static_cast<double>(peak_idx - lag_max);
    if (peak_idx > 0 && peak_idx + 1 < mag.size()) {
        const double ym = mag(peak_idx - 1);
        const double y0 = mag(peak_idx);
        const double yp = mag(peak_idx + 1);
        const double denom = ym - 2.0 * y0 + yp;
        if (denom < 0.0) refined += 0.5 * (ym - yp) / denom;
    }

    TdoaMeasurement out;
    out.sensor_a = a.sensor_id;
    out.sensor_b = b.sensor_id;
    out.delta_tau = refined / fs + (ta0 - tb0);
    out.t = start;
    out.peak_quality = quality;
    return out;
}

namespace {

double tdoa_residual(const Eigen::Vector3d& p, const std::vector<TdoaMeasurement>& tdoas,
                     const SensorLayout& layout) {
    double acc = 0.0;
    for (const auto& m : tdoas) {
        const double pred = ((p - layout.position_of(m.sensor_a)).norm() -
                             (p - layout.position_of(m.sensor_b)).norm()) /
                            kSpeedOfLight;
        const double r = pred - m.delta_tau;
        acc += r * r;
    }
    return acc;
}

}  // namespace

RFLocation spherical_intersection(const std::vector<TdoaMeasurement>& tdoas,
                                  const SensorLayout& layout) {
    layout.validate();
    const std::uint32_t ref = layout.reference_id;
    std::vector<std::pair<std::uint32_t, double>> others;  // (sensor, d = R_i - R_ref)
    for (const auto& m : tdoas) {
        if (m.sensor_b == ref && m.sensor_a != ref) {
            others.emplace_back(m.sensor_a, kSpeedOfLight * m.delta_tau);
        } else if (m.sensor_a == ref && m.sensor_b != ref) {
            others.emplace_back(m.sensor_b, -kSpeedOfLight * m.delta_tau);
        } else {
            throw InvalidArgument("every pair must include the reference sensor");
        }
    }
    if (others.size() < 3) {
        throw InvalidArgument("spherical intersection needs >= 3 independent pairs");
    }

    const Eigen::Vector3d origin = layout.position_of(ref);
    const int n = static_cast<int>(others.size());
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd d(n), delta(n);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d xi = layout.position_of(others[i].first) - origin;
        x.row(i) = xi.transpose();
        d(i) = others[i].second;
        delta(i) = xi.squaredNorm() - d(i) * d(i);
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (!(sv(2) > 0.0) || sv(0) / sv(2) > 1e8) {
        throw DegenerateGeometry("sensor geometry condition number exceeds 1e8");
    }

    // X p + d R_s = delta / 2, so p(R_s) = e - f R_s in the least-squares sense.
    const Eigen::Vector3d e = svd.solve(delta / 2.0);
    const Eigen::Vector3d f = svd.solve(d);
    const double qa = f.squaredNorm() - 1.0;
    const double qb = -2.0 * e.dot(f);
    const double qc = e.squaredNorm();

    std::vector<double> roots;
    if (std::abs(qa) < 1e-12) {
        if (std::abs(qb) > 1e-12) roots.push_back(-qc / qb);
    } else {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc < 0.0) throw NoRealRoot("quadratic in reference range has no real root");
        const double s = std::sqrt(disc);
        roots.push_back((-qb + s) / (2.0 * qa));
        roots.push_back((-qb - s) / (2.0 * qa));
    }

    bool found = false;
    Eigen::Vector3d best = Eigen::Vector3d::Zero();
    double best_res = std::numeric_limits<double>::infinity();
    for (double rs : roots) {
        if (!(rs > 0.0)) continue;
        const Eigen::Vector3d p = origin + (e - f * rs);
        const double res = tdoa_residual(p, tdoas, layout);
        if (res < best_res) {
            best_res = res;
            best = p;
            found = true;
        }
    }
    if (!found) throw NoRealRoot("no quadratic root yields a positive reference range");

    RFLocation out;
    out.position = best;
    out.method = LocalizationMethod::spherical_intersection;
    out.residual = best_res;
    if (!tdoas.empty()) out.t = tdoas.front().t;
    return out;
}

double ml_objective(const Eigen::Vector3d& r, const std::vector<TdoaMeasurement>& tdoas,
                    const SensorLayout& layout, const AltitudePrior& prior) {
    double obj = tdoa_residual(r, tdoas, layout);
    if (prior.sigma_z > 0.0) {
        constexpr double kTauRef = 1e-8;  // seconds; puts the prior on the TDOA scale
        const double rz = kTauRef * (r.z() - prior.altitude) / prior.sigma_z;
        obj += prior.weight * rz * rz;
    }
    return obj;
}

namespace {

struct GnResult {
    Eigen::Vector3d position;
    double objective;
    bool converged;
};

// Internally the residuals are scaled by c (range-difference meters); the
// minimizer is unchanged and gradients live on a sane numeric scale for the
// 1e-10 stopping test.
GnResult gauss_newton_ml(Eigen::Vector3d r, const std::vector<TdoaMeasurement>& tdoas,
                         const SensorLayout& layout, const AltitudePrior& prior) {
    constexpr double kTauRef = 1e-8;
    const bool fix_z = !(prior.sigma_z > 0.0);
    if (fix_z) r.z() = prior.altitude;
    const int l = static_cast<int>(tdoas.size());
    const int nres = l + (fix_z ? 0 : 1);
    const int npar = fix_z ? 2 : 3;
    double obj = ml_objective(r, tdoas, layout, prior);
    double lm = 1e-12;
    bool converged = false;

    for (int iter = 0; iter < 100; ++iter) {
        Eigen::VectorXd g(nres);
        Eigen::MatrixXd jac(nres, npar);
        for (int i = 0; i < l; ++i) {
            const Eigen::Vector3d pa = layout.position_of(tdoas[i].sensor_a);
            const Eigen::Vector3d pb = layout.position_of(tdoas[i].sensor_b);
            const double na = std::max((r - pa).norm(), 1e-9);
            const double nb = std::max((r - pb).norm(), 1e-9);
            g(i) = (na - nb) - kSpeedOfLight * tdoas[i].delta_tau;
            const Eigen::Vector3d grad = (r - pa) / na - (r - pb) / nb;
            for (int p = 0; p < npar; ++p) jac(i, p) = grad(p);
        }
        if (!fix_z) {
            const double w = std::sqrt(prior.weight) * kSpeedOfLight * kTauRef / prior.sigma_z;
            g(l) = w * (r.z() - prior.altitude);
            jac.row(l).setZero();
            jac(l, 2) = w;
        }

        const Eigen::VectorXd grad_full = 2.0 * jac.transpose() * g;
        if (grad_full.norm() < 1e-10) {
            converged = true;
            break;
        }
        Eigen::MatrixXd jtj = jac.transpose() * jac;
        bool stepped = false;
        for (int attempt = 0; attempt < 12; ++attempt) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal().array() += lm * (1.0 + jtj.diagonal().maxCoeff());
            const Eigen::VectorXd step = damped.ldlt().solve(-jac.transpose() * g);
            Eigen::Vector3d cand = r;
            for (int p = 0; p < npar; ++p) cand(p) += step(p);
            if (fix_z) cand.z() = prior.altitude;
            const double cand_obj = ml_objective(cand, tdoas, layout, prior);
            if (cand_obj <= obj && step.allFinite()) {
                r = cand;
                obj = cand_obj;
                lm = std::max(lm * 0.25, 1e-14);
                stepped = true;
                break;
            }
            lm *= 10.0;
        }
        if (!stepped) {
            converged = grad_full.norm() < 1e-8;  // stuck; close enough counts
            break;
        }
    }
    return {r, obj, converged};
}

}  // namespace

RFLocation ml_localize(const std::vector<TdoaMeasurement>& tdoas, const SensorLayout& layout,
                       const AltitudePrior& prior) {
    layout.validate();
    if (tdoas.size() < 2) throw InvalidArgument("ml_localize needs >= 2 independent pairs");
    if (!std::isfinite(prior.altitude)) throw InvalidArgument("altitude prior must be finite");

    // Coarse 50 m grid over the inflated layout bounding box at the prior altitude.
    Eigen::Vector3d lo = layout.sensors.front().position;
    Eigen::Vector3d hi = lo;
    for (const auto& s : layout.sensors) {
        lo = lo.cwiseMin(s.position);
        hi = hi.cwiseMax(s.position);
    }
    const Eigen::Vector3d center = 0.5 * (lo + hi);
    const double span = std::max({hi.x() - lo.x(), hi.y() - lo.y(), 200.0});
    const double half = span * 1.5;
    const double cell = 50.0;
    const int cells = std::max(2, static_cast<int>(std::ceil(2.0 * half / cell)));

    std::vector<std::pair<double, Eigen::Vector3d>> ranked;
    for (int ix = 0; ix <= cells; ++ix) {
        for (int iy = 0; iy <= cells; ++iy) {
            Eigen::Vector3d p(center.x() - half + ix * (2.0 * half / cells),
                              center.y() - half + iy * (2.0 * half / cells), prior.altitude);
            ranked.emplace_back(ml_objective(p, tdoas, layout, prior), p);
        }
    }
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // Refine the best few basins and cluster the refined minima.
    std::vector<GnResult> minima;
    const std::size_t seeds = std::min<std::size_t>(5, ranked.size());
    for (std::size_t i = 0; i < seeds; ++i) {
        GnResult res = gauss_newton_ml(ranked[i].second, tdoas, layout, prior);
        bool duplicate = false;
        for (auto& m : minima) {
            if ((m.position - res.position).norm() < 10.0) {
                if (res.objective < m.objective) m = res;
                duplicate = true;
                break;
            }
        }
        if (!duplicate) minima.push_back(res);
    }
    std::sort(minima.begin(), minima.end(),
              [](const GnResult& a, const GnResult& b) { return a.objective < b.objective; });

    RFLocation out;
    out.method = LocalizationMethod::ml_constrained;
    out.position = minima.front().position;
    out.residual = tdoa_residual(out.position, tdoas, layout);
    out.converged = minima.front().converged;
    if (!tdoas.empty()) out.t = tdoas.front().t;
    if (minima.size() > 1) {
        const double j1 = minima[0].objective;
        const double j2 = minima[1].objective;
        if (j2 - j1 < 0.01 * std::max(j2, 1e-30)) {
            out.ambiguous = true;
            out.alternate = minima[1].position;
        }
    }
    return out;
}

}  // namespace simtrack
