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

#include "simtrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "simtrack/dsp.hpp"
#include "simtrack/errors.hpp"
#include "simtrack/rng.hpp"

namespace simtrack {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint64_t noise_tag(std::uint32_t sensor) { return stream_tag("rfnoise") ^ sensor; }
std::uint64_t burst_tag(int target) { return stream_tag("burst") ^ static_cast<std::uint64_t>(target); }
}  // namespace

void Scenario::validate() const {
    if (!(duration > 0.0)) throw InvalidArgument("scenario duration must be > 0");
    if (targets.empty()) throw InvalidArgument("scenario needs at least one target");
    if (!(frame_rate > 0.0)) throw InvalidArgument("frame rate must be > 0");
    if (frame_height <= 0 || frame_width <= 0) throw InvalidArgument("frame size must be positive");
    camera.validate();
    if (camera.image_width != frame_width || camera.image_height != frame_height) {
        throw InvalidArgument("camera image size must match scenario frame size");
    }
    for (const auto& t : targets) {
        if (t.waypoints.empty()) throw InvalidArgument("target " + t.device + " has no waypoints");
        if (t.pixel_contrast == 0.0) throw InvalidArgument("target contrast must be nonzero");
        const double z0 = t.waypoints.front().position.z();
        for (const auto& w : t.waypoints) {
            if (std::abs(w.position.z() - z0) > 1e-9) {
                throw InvalidArgument("target " + t.device + " altitude must be constant");
            }
        }
        if (!t.tx.hop_pattern.empty() || t.tx.center_freq > 0.0) {
            if (!(t.tx.burst_len < t.tx.burst_period)) {
                throw InvalidArgument("burst_len must be < burst_period");
            }
        }
    }
    for (const auto& [id, f] : sensor_tuning) {
        if (sensors.find(id) == nullptr) {
            throw InvalidArgument("tuning references unknown sensor " + std::to_string(id));
        }
        if (!(f > 0.0)) throw InvalidArgument("tuned frequency must be positive");
    }
}

std::vector<std::vector<std::uint32_t>> Scenario::tuning_groups() const {
    std::map<double, std::vector<std::uint32_t>> by_freq;
    for (const auto& [id, f] : sensor_tuning) by_freq[f].push_back(id);
    std::vector<std::vector<std::uint32_t>> groups;
    for (auto& [f, ids] : by_freq) {
        std::sort(ids.begin(), ids.end());
        groups.push_back(ids);
    }
    return groups;
}

Eigen::Vector3d target_position(const TargetSpec& spec, double t) {
    const auto& wp = spec.waypoints;
    if (t <= wp.front().t) return wp.front().position;
    if (t >= wp.back().t) return wp.back().position;
    for (std::size_t i = 1; i < wp.size(); ++i) {
        if (t <= wp[i].t) {
            const double span = wp[i].t - wp[i - 1].t;
            const double a = span > 0.0 ? (t - wp[i - 1].t) / span : 1.0;
            return (1.0 - a) * wp[i - 1].position + a * wp[i].position;
        }
    }
    return wp.back().position;
}

// ---------------------------------------------------------------------------
// EO generation
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd smooth_random_field(Rng& rng, int rows, int cols) {
    // low-order 2D cosine mixture, zero mean
    Eigen::MatrixXd field = Eigen::MatrixXd::Zero(rows, cols);
    for (int a = 0; a <= 2; ++a) {
        for (int b = 0; b <= 2; ++b) {
            if (a == 0 && b == 0) continue;
            const double coeff = rng.next_gauss() / (1.0 + a + b);
            const double pr = rng.next_double() * kTwoPi;
            const double pc = rng.next_double() * kTwoPi;
            for (int r = 0; r < rows; ++r) {
                const double fr = std::cos(3.14159265358979323846 * a * r / rows + pr);
                for (int c = 0; c < cols; ++c) {
                    field(r, c) += coeff * fr * std::cos(3.14159265358979323846 * b * c / cols + pc);
                }
            }
        }
    }
    const double scale = field.cwiseAbs().maxCoeff();
    if (scale > 0.0) field /= scale;
    return field;
}

Eigen::MatrixXd gaussian_blur(const Eigen::MatrixXd& in, double sigma) {
    const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    Eigen::VectorXd kernel(2 * half + 1);
    for (int i = 0; i < kernel.size(); ++i) {
        const double d = i - half;
        kernel(i) = std::exp(-0.5 * d * d / (sigma * sigma));
    }
    kernel /= kernel.sum();
    Eigen::MatrixXd tmp = Eigen::MatrixXd::Zero(in.rows(), in.cols());
    for (int r = 0; r < in.rows(); ++r) {
        for (int c = 0; c < in.cols(); ++c) {
            double acc = 0.0;
            for (int k = -half; k <= half; ++k) {
                const int cc = std::clamp<int>(c + k, 0, static_cast<int>(in.cols()) - 1);
                acc += kernel(k + half) * in(r, cc);
            }
            tmp(r, c) = acc;
        }
    }
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(in.rows(), in.cols());
    for (int c = 0; c < in.cols(); ++c) {
        for (int r = 0; r < in.rows(); ++r) {
            double acc = 0.0;
            for (int k = -half; k <= half; ++k) {
                const int rr = std::clamp<int>(r + k, 0, static_cast<int>(in.rows()) - 1);
                acc += kernel(k + half) * tmp(rr, c);
            }
            out(r, c) = acc;
        }
    }
    return out;
}

}  // namespace

EoGenResult generate_eo(const Scenario& scn) {
    scn.validate();
    EoGenResult out;
    const int frames = static_cast<int>(std::llround(scn.duration * scn.frame_rate));
    const int h = scn.frame_height;
    const int w = scn.frame_width;
    const auto& eo = scn.eo;

    // rank-limited background: smooth spatial modes x slowly varying coefficients
    Rng bg_rng = substream(scn.seed, stream_tag("eobg"));
    std::vector<Eigen::MatrixXd> modes;
    std::vector<double> mode_freq, mode_phase;
    for (int m = 0; m < std::max(0, eo.background_rank - 1); ++m) {
        modes.push_back(smooth_random_field(bg_rng, h, w));
        mode_freq.push_back(0.05 + 0.1 * bg_rng.next_double());
        mode_phase.push_back(kTwoPi * bg_rng.next_double());
    }
    Eigen::MatrixXd base = Eigen::MatrixXd::Constant(h, w, eo.background_level);
    if (!modes.empty()) base += 0.08 * modes.front();  // static texture

    // advected cloud field
    Eigen::MatrixXd cloud;
    int cloud_cols = 0;
    if (eo.cloud_amplitude > 0.0) {
        Rng cloud_rng = substream(scn.seed, stream_tag("eocloud"));
        cloud_cols = w + static_cast<int>(std::ceil(std::abs(eo.cloud_speed_px) * scn.duration)) + 8;
        // pad before blurring so border clamping cannot inflate edge variance
        const int pad = static_cast<int>(std::ceil(3.0 * eo.cloud_sigma_px)) + 2;
        Eigen::MatrixXd noise(h + 2 * pad, cloud_cols + 2 * pad);
        for (int r = 0; r < noise.rows(); ++r) {
            for (int c = 0; c < noise.cols(); ++c) noise(r, c) = cloud_rng.next_gauss();
        }
        cloud = gaussian_blur(noise, eo.cloud_sigma_px).block(pad, pad, h, cloud_cols);
        const double sd = std::sqrt(cloud.array().square().mean());
        if (sd > 0.0) cloud *= eo.cloud_amplitude / sd;
    }

    std::vector<bool> ever_visible(scn.targets.size(), false);
    out.frames.reserve(frames);
    out.timestamps.reserve(frames);

    for (int k = 0; k < frames; ++k) {
        const double t = k / scn.frame_rate;
        Eigen::MatrixXd img = base;
        for (std::size_t m = 0; m < modes.size(); ++m) {
            const double a =
                eo.background_drift * std::sin(kTwoPi * mode_freq[m] * t + mode_phase[m]);
            if (a != 0.0) img += a * modes[m];
        }
        if (cloud_cols > 0) {
            const double shift = std::abs(eo.cloud_speed_px) * t;
            const int s0 = static_cast<int>(std::floor(shift));
            const double frac = shift - s0;
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    const int c0 = std::min(c + s0, cloud_cols - 2);
                    img(r, c) += (1.0 - frac) * cloud(r, c0) + frac * cloud(r, c0 + 1);
                }
            }
        }

        for (std::size_t ti = 0; ti < scn.targets.size(); ++ti) {
            const auto& tgt = scn.targets[ti];
            const Eigen::Vector3d pos = target_position(tgt, t);
            PixelPoint px;
            try {
                px = project_world_to_pixel(WorldPoint::from(pos), scn.camera);
            } catch (const Error&) {
                continue;  // behind the camera: no truth row, nothing rendered
            }
            out.truth.push_back({t, tgt.device, px.u, px.v, px.in_frame});
            out.world_truth.push_back({t, tgt.device, pos});
            if (!px.in_frame) continue;
            ever_visible[ti] = true;
            const double range = std::max(pos.norm(), 1.0);
            double amp = tgt.pixel_contrast * (eo.range_ref / range) * (eo.range_ref / range);
            if (tgt.scintillation > 0.0) {
                Rng srng = substream(scn.seed, stream_tag("scint") ^ ti,
                                     static_cast<std::uint64_t>(k));
                const double s = tgt.scintillation;
                amp *= std::exp(s * srng.next_gauss() - 0.5 * s * s);
            }
            const double sig = tgt.pixel_sigma;
            const int reach = std::max(2, static_cast<int>(std::ceil(4.0 * sig)));
            const int r0 = std::max(0, static_cast<int>(std::floor(px.v)) - reach);
            const int r1 = std::min(h - 1, static_cast<int>(std::ceil(px.v)) + reach);
            const int c0 = std::max(0, static_cast<int>(std::floor(px.u)) - reach);
            const int c1 = std::min(w - 1, static_cast<int>(std::ceil(px.u)) + reach);
            for (int r = r0; r <= r1; ++r) {
                for (int c = c0; c <= c1; ++c) {
                    const double d2 = (r - px.v) * (r - px.v) + (c - px.u) * (c - px.u);
                    img(r, c) += amp * std::exp(-0.5 * d2 / (sig * sig));
                }
            }
        }

        if (eo.noise_std > 0.0) {
            Rng nrng = substream(scn.seed, stream_tag("eonoise"), static_cast<std::uint64_t>(k));
            for (int c = 0; c < w; ++c) {
                for (int r = 0; r < h; ++r) img(r, c) += eo.noise_std * nrng.next_gauss();
            }
        }

        // 8-bit quantization defines the output exactly
        Eigen::MatrixXf q(h, w);
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                const double clamped = std::clamp(img(r, c), 0.0, 1.0);
                q(r, c) = static_cast<float>(std::lround(clamped * 255.0) / 255.0);
            }
        }
        out.frames.push_back(std::move(q));
        out.timestamps.push_back(t);
    }

    for (std::size_t ti = 0; ti < scn.targets.size(); ++ti) {
        if (!ever_visible[ti]) {
            out.warnings.push_back("TargetNeverVisible: " + scn.targets[ti].device +
                                   " never projects inside the frame");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// RF generation
// ---------------------------------------------------------------------------

namespace {

struct BurstWaveform {
    Eigen::VectorXcd samples;  // impaired, unit mean power before ramps
};

int samples_per_symbol(const TxSpec& tx, double fs) {
    const double rate = tx.symbol_rate > 0.0 ? tx.symbol_rate : tx.bandwidth / 1.35;
    int sps = std::max(1, static_cast<int>(std::llround(fs / rate)));
    return sps;
}

double effective_bandwidth(const TxSpec& tx, double fs) {
    if (tx.bandwidth > 0.0) return tx.bandwidth;
    const int sps = samples_per_symbol(tx, fs);
    return 1.35 * fs / sps;
}

double burst_center_freq(const TxSpec& tx, std::int64_t burst) {
    if (tx.hop_pattern.empty()) return tx.center_freq;
    return tx.hop_pattern[static_cast<std::size_t>(burst) % tx.hop_pattern.size()];
}

BurstWaveform synthesize_burst(const Scenario& scn, int target_idx, std::int64_t burst) {
    const TxSpec& tx = scn.targets[static_cast<std::size_t>(target_idx)].tx;
    const double fs = scn.rf_fs;
    const int sps = samples_per_symbol(tx, fs);
    constexpr int kSpan = 8;
    const int len = static_cast<int>(std::llround(tx.burst_len * fs));
    const int n_sym = std::max(1, len / sps);
    Eigen::VectorXd h = rrc_taps(0.35, sps, kSpan);
    const int nt = static_cast<int>(h.size());

    Rng rng = substream(scn.seed, burst_tag(target_idx), static_cast<std::uint64_t>(burst));
    Eigen::VectorXcd shaped = Eigen::VectorXcd::Zero(n_sym * sps + nt);
    const double inv_sqrt2 = 0.70710678118654752440;
    for (int k = 0; k < n_sym; ++k) {
        const std::uint64_t bits = rng.next_u64();
        const std::complex<double> sym((bits & 1) ? inv_sqrt2 : -inv_sqrt2,
                                       (bits & 2) ? inv_sqrt2 : -inv_sqrt2);
        shaped.segment(k * sps, nt) += sym * h;
    }
    const int gd = kSpan * sps;
    Eigen::VectorXcd w = shaped.segment(gd, len);

    const double rms = std::sqrt(w.squaredNorm() / len);
    if (rms > 0.0) w /= rms;

    // transmitter impairments: ramps, CFO, IQ imbalance
    const auto& imp = tx.impairments;
    const int ramp = std::min(len / 2, static_cast<int>(std::llround(imp.rise_time_s * fs)));
    for (int i = 0; i < ramp; ++i) {
        const double g = 0.5 - 0.5 * std::cos(3.14159265358979323846 * (i + 1) / ramp);
        w(i) *= g;
        w(len - 1 - i) *= g;
    }
    if (imp.cfo_hz != 0.0) {
        const double wc = kTwoPi * imp.cfo_hz / fs;
        for (int i = 0; i < len; ++i) {
            w(i) *= std::complex<double>(std::cos(wc * i), std::sin(wc * i));
        }
    }
    if (imp.iq_gain_db != 0.0 || imp.iq_phase_deg != 0.0) {
        const double g = std::pow(10.0, imp.iq_gain_db / 20.0);
        const double phi = imp.iq_phase_deg * 3.14159265358979323846 / 180.0;
        const std::complex<double> ge(g * std::cos(phi), g * std::sin(phi));
        const std::complex<double> alpha = (1.0 + ge) * 0.5;
        const std::complex<double> beta = (1.0 - std::conj(ge)) * 0.5;
        for (int i = 0; i < len; ++i) w(i) = alpha * w(i) + beta * std::conj(w(i));
    }
    return {std::move(w)};
}

bool burst_in_band(const Scenario& scn, const TxSpec& tx, std::int64_t burst, double tuned_hz,
                   double* offset_hz) {
    const double center = burst_center_freq(tx, burst);
    const double off = center - tuned_hz;
    const double bw = effective_bandwidth(tx, scn.rf_fs);
    if (std::abs(off) + bw / 2.0 > 0.49 * scn.rf_fs) return false;
    if (offset_hz != nullptr) *offset_hz = off;
    return true;
}

}  // namespace

void render_rf_chunk(const Scenario& scn, std::uint32_t sensor_id, std::int64_t n0,
                     std::int64_t n1, Eigen::VectorXcd& buf) {
    const double fs = scn.rf_fs;
    const std::int64_t count = n1 - n0;
    buf.resize(count);

    const std::uint64_t ntag = noise_tag(sensor_id);
    for (std::int64_t i = 0; i < count; ++i) {
        Rng r = substream(scn.seed, ntag, static_cast<std::uint64_t>(n0 + i));
        buf(i) = scn.rf_noise_std * r.next_cgauss();
    }

    const auto tuned_it = scn.sensor_tuning.find(sensor_id);
    if (tuned_it == scn.sensor_tuning.end()) return;
    const double tuned = tuned_it->second;
    const Eigen::Vector3d sensor_pos = scn.sensors.position_of(sensor_id);
    constexpr int kPad = 32;  // fractional-delay interpolator margin

    for (int ti = 0; ti < static_cast<int>(scn.targets.size()); ++ti) {
        const auto& tgt = scn.targets[static_cast<std::size_t>(ti)];
        const TxSpec& tx = tgt.tx;
        if (tx.center_freq <= 0.0 && tx.hop_pattern.empty()) continue;
        const double period = tx.burst_period;
        const std::int64_t len = static_cast<std::int64_t>(std::llround(tx.burst_len * fs));
        const double t_lo = static_cast<double>(n0) / fs;
        const double t_hi = static_cast<double>(n1) / fs;
        const std::int64_t b_lo =
            std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((t_lo - 1e-4) / period)) - 1);
        const std::int64_t b_hi = static_cast<std::int64_t>(std::ceil(t_hi / period)) + 1;

        for (std::int64_t b = b_lo; b <= b_hi; ++b) {
            const double start_t = static_cast<double>(b) * period;
            if (start_t + tx.burst_len > scn.rf_active() || start_t >= scn.duration) continue;
            double off_hz = 0.0;
            if (!burst_in_band(scn, tx, b, tuned, &off_hz)) continue;

            const Eigen::Vector3d pos = target_position(tgt, start_t + tx.burst_len / 2.0);
            const double range = std::max((pos - sensor_pos).norm(), 1.0);
            const double tau = (pos - sensor_pos).norm() / kSpeedOfLight;
            const double arrival = start_t + tau;
            const double start_samples = arrival * fs;
            const std::int64_t base = static_cast<std::int64_t>(std::floor(start_samples)) - kPad;
            const double frac = start_samples - std::floor(start_samples);
            const std::int64_t span_end = base + len + 2 * kPad;
            if (span_end <= n0 || base >= n1) continue;

            BurstWaveform wave = synthesize_burst(scn, ti, b);
            Eigen::VectorXcd padded = Eigen::VectorXcd::Zero(len + 2 * kPad);
            padded.segment(kPad, len) = wave.samples;
            // y(i) = padded(i - frac): band-limited shift by the fractional part
            Eigen::VectorXcd delayed = delay_fractional(padded, frac, kPad / 2);

            const double amp = scn.rf_amp_ref * std::pow(10.0, tx.tx_power_db / 20.0) / range;
            const double carrier_phase = -kTwoPi * burst_center_freq(tx, b) * tau;
            const std::complex<double> rot(amp * std::cos(carrier_phase),
                                           amp * std::sin(carrier_phase));
            const double wo = kTwoPi * off_hz / fs;
            const std::int64_t i0 = std::max(n0, base);
            const std::int64_t i1 = std::min(n1, span_end);
            for (std::int64_t n = i0; n < i1; ++n) {
                const std::complex<double> mod(std::cos(wo * static_cast<double>(n)),
                                               std::sin(wo * static_cast<double>(n)));
                buf(n - n0) += rot * mod * delayed(n - base);
            }
        }
    }
}

RFCapture generate_rf_capture(const Scenario& scn, std::uint32_t sensor_id) {
    scn.validate();
    RFCapture cap;
    cap.fs = scn.rf_fs;
    const auto tuned_it = scn.sensor_tuning.find(sensor_id);
    cap.f_center = tuned_it != scn.sensor_tuning.end() ? tuned_it->second : 0.0;
    cap.sensor_id = sensor_id;
    const auto off_it = scn.rf_offsets.find(sensor_id);
    cap.clock_offset = off_it != scn.rf_offsets.end() ? off_it->second : 0.0;
    cap.t0 = cap.clock_offset;  // capture begins at unified time zero
    const std::int64_t n = static_cast<std::int64_t>(std::llround(scn.duration * scn.rf_fs));
    render_rf_chunk(scn, sensor_id, 0, n, cap.samples);
    return cap;
}

std::vector<RfTruthRow> rf_truth(const Scenario& scn) {
    std::vector<RfTruthRow> rows;
    const int windows = static_cast<int>(std::floor(scn.rf_active() / kDecisionWindowSec));
    for (const auto& group : scn.tuning_groups()) {
        if (group.size() < 2) continue;
        const double freq = scn.sensor_tuning.at(group.front());
        const std::uint32_t ref = group.front();
        for (int ti = 0; ti < static_cast<int>(scn.targets.size()); ++ti) {
            const auto& tgt = scn.targets[static_cast<std::size_t>(ti)];
            if (!burst_in_band(scn, tgt.tx, 0, freq, nullptr)) continue;
            for (int w = 0; w < windows; ++w) {
                const double t = w * kDecisionWindowSec;
                const Eigen::Vector3d pos = target_position(tgt, t);
                const double ref_range = (pos - scn.sensors.position_of(ref)).norm();
                for (std::size_t si = 1; si < group.size(); ++si) {
                    const double range = (pos - scn.sensors.position_of(group[si])).norm();
                    rows.push_back({t, group[si], ref, (range - ref_range) / kSpeedOfLight,
                                    tgt.device});
                }
            }
        }
    }
    return rows;
}

std::vector<std::string> rf_band_warnings(const Scenario& scn) {
    std::vector<std::string> warnings;
    for (const auto& group : scn.tuning_groups()) {
        const double freq = scn.sensor_tuning.at(group.front());
        std::vector<int> in_band;
        for (int ti = 0; ti < static_cast<int>(scn.targets.size()); ++ti) {
            if (burst_in_band(scn, scn.targets[static_cast<std::size_t>(ti)].tx, 0, freq, nullptr)) {
                in_band.push_back(ti);
            }
        }
        for (std::size_t i = 0; i < in_band.size(); ++i) {
            for (std::size_t j = i + 1; j < in_band.size(); ++j) {
                const auto& a = scn.targets[static_cast<std::size_t>(in_band[i])];
                const auto& b = scn.targets[static_cast<std::size_t>(in_band[j])];
                const double bw_a = effective_bandwidth(a.tx, scn.rf_fs);
                const double bw_b = effective_bandwidth(b.tx, scn.rf_fs);
                if (std::abs(a.tx.center_freq - b.tx.center_freq) < (bw_a + bw_b) / 2.0) {
                    warnings.push_back("BandCollision: " + a.device + " and " + b.device +
                                       " overlap near " + std::to_string(freq * 1e-6) + " MHz");
                }
            }
        }
    }
    return warnings;
}

// ---------------------------------------------------------------------------
// presets
// ---------------------------------------------------------------------------

namespace {

CameraModel preset_camera() {
    CameraModel cam;
    const double f = 420.0;
    cam.intrinsic << f, 0.0, 0.0, 0.0, f, 0.0, 160.0, 128.0, 1.0;
    // camera at the ENU origin looking along +Y (north), u east, v down
    cam.rotation << 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0;
    cam.translation.setZero();
    cam.image_width = 320;
    cam.image_height = 256;
    return cam;
}

SensorLayout preset_sensors() {
    SensorLayout layout;
    layout.sensors = {
        {101, {-140.0, 420.0, 4.0}},  {102, {150.0, 380.0, 55.0}}, {103, {-40.0, 150.0, 2.0}},
        {104, {120.0, 160.0, 40.0}},  {105, {-180.0, 260.0, 70.0}}, {106, {60.0, 300.0, 25.0}},
    };
    layout.reference_id = 101;
    return layout;
}

TxSpec tx_phantom() {
    TxSpec tx;
    tx.center_freq = 2406e6;
    tx.symbol_rate = 5e6;  // sps 2 at 10 MHz
    tx.burst_len = 0.0072;
    tx.impairments = {8e3, 0.4, 3.0, 20e-6};
    return tx;
}

TxSpec tx_mavic() {
    TxSpec tx;
    tx.center_freq = 2468e6;
    tx.symbol_rate = 2.5e6;  // sps 4
    tx.burst_len = 0.009;
    tx.impairments = {25e3, -0.5, -4.0, 60e-6};
    return tx;
}

TxSpec tx_m600() {
    TxSpec tx;
    tx.center_freq = 2476e6;
    tx.symbol_rate = 2.5e6;
    tx.burst_len = 0.0135;
    tx.impairments = {-5e3, 0.8, 2.0, 150e-6};
    return tx;
}

TxSpec tx_if1200() {
    TxSpec tx;
    tx.center_freq = 908e6;
    tx.symbol_rate = 78125.0;  // sps 128; narrowband hopper
    tx.burst_len = 0.006;
    tx.hop_pattern = {908e6, 905.5e6, 910.5e6, 908e6, 911.5e6, 904.5e6};
    tx.impairments = {-15e3, 1.0, -2.0, 10e-6};
    return tx;
}

TargetSpec make_target(const std::string& device, const TxSpec& tx, double x, double contrast,
                       double sigma, double duration, bool north_to_south) {
    TargetSpec t;
    t.device = device;
    t.tx = tx;
    t.pixel_contrast = contrast;
    t.pixel_sigma = sigma;
    const double alt = 30.0;
    const double y_far = 500.0;
    const double y_near = 240.0;
    if (north_to_south) {
        t.waypoints = {{{x, y_far, alt}, 0.0}, {{x, y_near, alt}, duration}};
    } else {
        t.waypoints = {{{x, y_near, alt}, 0.0}, {{x, y_far, alt}, duration}};
    }
    return t;
}

void tune(Scenario& scn, std::initializer_list<std::uint32_t> ids, double freq) {
    for (auto id : ids) scn.sensor_tuning[id] = freq;
}

Scenario base_scenario(const std::string& name, double duration) {
    Scenario scn;
    scn.name = name;
    scn.duration = duration;
    scn.camera = preset_camera();
    scn.frame_width = scn.camera.image_width;
    scn.frame_height = scn.camera.image_height;
    scn.sensors = preset_sensors();
    return scn;
}

}  // namespace

Scenario preset(const std::string& name) {
    if (name == "r06") {
        Scenario scn = base_scenario(name, 12.0);
        scn.seed = 106;
        scn.targets = {make_target("Phantom", tx_phantom(), 10.0, 0.35, 1.2, scn.duration, true)};
        tune(scn, {101, 102, 103, 105}, 2406e6);
        for (auto id : {101u, 102u, 103u, 105u}) scn.rf_offsets[id] = 12.0;
        scn.rf_active_sec = 4.0;
        scn.eo.cloud_amplitude = 0.03;  // the hard-cloud scenario
        return scn;
    }
    if (name == "r14" || name == "r13") {
        const bool test_pass = name == "r14";
        Scenario scn = base_scenario(name, test_pass ? 12.0 : 3.5);
        scn.seed = test_pass ? 114 : 113;
        scn.targets = {
            make_target("Mavic", tx_mavic(), -25.0, -0.22, 1.2, scn.duration, test_pass),
            make_target("Phantom", tx_phantom(), 25.0, 0.35, 1.2, scn.duration, test_pass),
        };
        scn.eo.cloud_amplitude = 0.003;
        scn.eo.cloud_speed_px = 3.0;
        scn.eo.background_drift = 0.0;
        tune(scn, {101, 102, 103}, 2468e6);
        tune(scn, {104, 105, 106}, 2406e6);
        if (test_pass) {
            for (auto id : {101u, 102u, 103u, 104u, 105u}) scn.rf_offsets[id] = 12.0;
            scn.rf_offsets[106] = 18.0;  // 12 s global lag + 6 s extra on d106
            scn.rf_active_sec = 4.0;
        } else {
            scn.rf_active_sec = scn.duration;
        }
        return scn;
    }
    if (name == "r16" || name == "r15") {
        const bool test_pass = name == "r16";
        Scenario scn = base_scenario(name, test_pass ? 12.0 : 3.5);
        scn.seed = test_pass ? 116 : 115;
        scn.targets = {
            make_target("IF1200", tx_if1200(), -25.0, -0.40, 2.0, scn.duration, test_pass),
            make_target("m600", tx_m600(), 25.0, 0.50, 2.0, scn.duration, test_pass),
        };
        tune(scn, {101, 102, 103}, 908e6);
        tune(scn, {104, 105, 106}, 2476e6);
        if (test_pass) {
            for (auto id : {101u, 102u, 103u, 104u, 105u}) scn.rf_offsets[id] = 12.0;
            scn.rf_offsets[106] = 18.0;
            scn.rf_active_sec = 4.0;
        } else {
            scn.rf_active_sec = scn.duration;
        }
        return scn;
    }
    throw UnknownPreset("no preset named '" + name + "'");
}

Scenario preset_pass(const std::string& name, int pass) {
    Scenario scn = preset(name);
    if (pass <= 1) return scn;
    scn.name = name + "p" + std::to_string(pass);
    scn.seed += 7919ull * static_cast<std::uint64_t>(pass);
    const double jitter = 3.0 * (pass - 1);
    for (auto& t : scn.targets) {
        for (auto& w : t.waypoints) w.position.x() += jitter;
    }
    return scn;
}

}  // namespace simtrack
