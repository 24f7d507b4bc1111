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

#include "simtrack/rf_preproc.hpp"

#include <algorithm>
#include <cmath>

#include "simtrack/dsp.hpp"
#include "simtrack/errors.hpp"

namespace simtrack {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr int kMaWindow = 8;      // moving-average power window (samples)
constexpr int kEdgeDwell = 16;    // consecutive MA samples required above threshold
constexpr double kEdgeSnr = 3.9810717055349722;  // 6 dB
constexpr double kOccupancySnr = 10.0;           // 10 dB over the floor

std::vector<int> decimation_stages(std::int64_t factor) {
    std::vector<int> stages;
    while (factor > 1) {
        int best = 0;
        for (int f = 8; f >= 2; --f) {
            if (factor % f == 0) {
                best = f;
                break;
            }
        }
        if (best == 0) best = static_cast<int>(factor);  // prime > 8, single stage
        stages.push_back(best);
        factor /= best;
    }
    return stages;
}

Eigen::VectorXd moving_average_power(const Eigen::Ref<const Eigen::VectorXcd>& x) {
    const int n = static_cast<int>(x.size());
    Eigen::VectorXd p(n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += std::norm(x(i));
        if (i >= kMaWindow) acc -= std::norm(x(i - kMaWindow));
        p(i) = acc / std::min(i + 1, kMaWindow);
    }
    return p;
}

double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    const std::size_t idx = static_cast<std::size_t>(q * (v.size() - 1));
    std::nth_element(v.begin(), v.begin() + idx, v.end());
    return v[idx];
}

}  // namespace

void RFCapture::validate() const {
    if (!(fs > 0.0)) throw InvalidArgument("capture fs must be > 0");
    if (!samples.allFinite()) throw InvalidArgument("capture samples must be finite");
    if (!(std::abs(clock_offset) < 60.0)) {
        throw InvalidArgument("clock offset must satisfy |offset| < 60 s");
    }
}

RFCapture downconvert_filter_decimate(const RFCapture& cap, double f_target, double bw) {
    cap.validate();
    if (!(bw > 0.0)) throw InvalidArgument("target bandwidth must be > 0");
    const double off = f_target - cap.f_center;
    if (std::abs(off) + bw / 2.0 > cap.fs / 2.0 + 1e-6) {
        throw BandOutOfCapture("band [" + std::to_string(f_target - bw / 2.0) + ", " +
                               std::to_string(f_target + bw / 2.0) + "] exceeds capture Nyquist");
    }
    const RationalRate rate = reduce_ratio(cap.fs, bw);

    Eigen::VectorXcd mixed(cap.samples.size());
    if (off == 0.0) {
        mixed = cap.samples;
    } else {
        const double w = -kTwoPi * off / cap.fs;
        for (Eigen::Index n = 0; n < cap.samples.size(); ++n) {
            mixed(n) = cap.samples(n) * std::complex<double>(std::cos(w * n), std::sin(w * n));
        }
    }

    Eigen::VectorXcd y;
    if (rate.up == 1) {
        // Integer decimation, multistage. Every stage only has to keep the
        // final +-bw/2 band alias-free, so early stages stay short.
        y = std::move(mixed);
        double r = cap.fs;
        for (int f : decimation_stages(rate.down)) {
            const double out_rate = r / f;
            const double pass = 0.40 * bw;
            const double stop = out_rate - 0.5 * bw;
            const int taps = fir_taps_for_transition((stop - pass) / r);
            y = fir_decimate(y, fir_lowpass(taps, 0.5 * (pass + stop) / r), f);
            r = out_rate;
        }
    } else {
        y = resample_rational(mixed, rate.up, rate.down);
    }

    RFCapture out;
    out.samples = std::move(y);
    out.fs = bw;
    out.f_center = f_target;
    out.t0 = cap.t0;
    out.sensor_id = cap.sensor_id;
    out.clock_offset = cap.clock_offset;
    return out;
}

double detect_hop_center(const RFCapture& cap, double window_sec) {
    cap.validate();
    const int n = std::min<std::int64_t>(cap.samples.size(),
                                         static_cast<std::int64_t>(std::llround(window_sec * cap.fs)));
    if (n < 256) throw InvalidArgument("hop detection window must contain >= 256 samples");
    // Short fixed segments: many averages keep noise bins tight, and a low
    // percentile survives signals occupying most of the band.
    const int nfft = 256;
    Eigen::VectorXd psd = welch_psd(cap.samples.head(n), nfft);
    const int bins = static_cast<int>(psd.size());

    std::vector<double> sorted(psd.data(), psd.data() + bins);
    const double floor = percentile(sorted, 0.10);
    const double thresh = floor * kOccupancySnr;

    // dominant contiguous occupied run by total power
    double best_power = 0.0;
    int best_lo = -1, best_hi = -1;
    int run_lo = -1;
    double run_power = 0.0;
    for (int i = 0; i <= bins; ++i) {
        const bool occ = i < bins && psd(i) > thresh && floor > 0.0;
        if (occ) {
            if (run_lo < 0) {
                run_lo = i;
                run_power = 0.0;
            }
            run_power += psd(i);
        } else if (run_lo >= 0) {
            if (run_power > best_power) {
                best_power = run_power;
                best_lo = run_lo;
                best_hi = i - 1;
            }
            run_lo = -1;
        }
    }
    if (best_lo < 0) throw NoSignal("no spectral bin exceeds the occupancy threshold");

    const double bin_hz = cap.fs / bins;
    double centroid = 0.0;
    double total = 0.0;
    for (int i = best_lo; i <= best_hi; ++i) {
        const double f = (i - bins / 2) * bin_hz;
        centroid += f * psd(i);
        total += psd(i);
    }
    return cap.f_center + centroid / total;
}

namespace detail {

double noise_floor_ma(const Eigen::Ref<const Eigen::VectorXcd>& samples) {
    const Eigen::VectorXd p = moving_average_power(samples);
    std::vector<double> v(p.data(), p.data() + p.size());
    return percentile(std::move(v), 0.10);
}

bool burst_edges(const Eigen::Ref<const Eigen::VectorXcd>& window, double floor_power, int* rise,
                 int* fall) {
    const int n = static_cast<int>(window.size());
    const Eigen::VectorXd p = moving_average_power(window);
    const double eps = 1e-12 * p.maxCoeff();
    const double thresh = std::max(floor_power * kEdgeSnr, eps);
    if (!(thresh > 0.0)) return false;

    // sustained crossings of the MA power (dwell suppresses noise flickers)
    int rise_ma = -1;
    int run = 0;
    for (int i = 0; i < n; ++i) {
        run = p(i) >= thresh ? run + 1 : 0;
        if (run >= kEdgeDwell) {
            rise_ma = i - kEdgeDwell + 1;
            break;
        }
    }
    if (rise_ma < 0) return false;
    int fall_ma = rise_ma;
    run = 0;
    for (int i = n - 1; i >= rise_ma; --i) {
        run = p(i) >= thresh ? run + 1 : 0;
        if (run >= kEdgeDwell) {
            fall_ma = i;
            break;
        }
    }

    // refine to instantaneous power for sample-accurate edges
    int r = rise_ma;
    for (int i = std::max(0, rise_ma - kMaWindow + 1); i <= fall_ma; ++i) {
        if (std::norm(window(i)) >= thresh) {
            r = i;
            break;
        }
    }
    int f = fall_ma;
    for (int i = fall_ma; i >= r; --i) {
        if (std::norm(window(i)) >= thresh) {
            f = i;
            break;
        }
    }
    *rise = r;
    *fall = f;
    return true;
}

bool occupied_band(const Eigen::Ref<const Eigen::VectorXcd>& samples, double fs, double* lo_hz,
                   double* hi_hz, double* floor_power) {
    const int nfft = 256;
    if (samples.size() < nfft) return false;
    Eigen::VectorXd psd = welch_psd(samples, nfft);
    const int bins = static_cast<int>(psd.size());
    std::vector<double> sorted(psd.data(), psd.data() + bins);
    const double floor = percentile(std::move(sorted), 0.10);
    if (floor_power != nullptr) *floor_power = floor;
    if (!(floor > 0.0)) return false;
    const double thresh = floor * kOccupancySnr;
    int lo = -1, hi = -1;
    for (int i = 0; i < bins; ++i) {
        if (psd(i) > thresh) {
            if (lo < 0) lo = i;
            hi = i;
        }
    }
    if (lo < 0) return false;
    const double bin_hz = fs / bins;
    *lo_hz = (std::max(0, lo - 2) - bins / 2) * bin_hz;
    *hi_hz = (std::min(bins - 1, hi + 2) - bins / 2) * bin_hz;
    return true;
}

}  // namespace detail

std::vector<FingerprintVector> segment_and_trim(const RFCapture& baseband) {
    baseband.validate();
    if (std::abs(baseband.fs - kFingerprintRate) > 0.5) {
        throw InvalidArgument("segment_and_trim requires a 250 kHz baseband stream");
    }
    const Eigen::Index n = baseband.samples.size();
    const int windows = static_cast<int>(n / kDecisionWindowSamples);
    std::vector<FingerprintVector> out;
    if (windows == 0) return out;

    const double floor = detail::noise_floor_ma(baseband.samples);
    for (int w = 0; w < windows; ++w) {
        const Eigen::Index start = static_cast<Eigen::Index>(w) * kDecisionWindowSamples;
        int rise = 0, fall = 0;
        if (!detail::burst_edges(baseband.samples.segment(start, kDecisionWindowSamples), floor,
                                 &rise, &fall)) {
            continue;
        }
        FingerprintVector v;
        v.iq = Eigen::VectorXcd::Zero(kFingerprintLength);
        const Eigen::Index abs_rise = start + rise;
        const Eigen::Index abs_fall = start + fall;
        const Eigen::Index copy_end = std::min<Eigen::Index>(abs_rise + kFingerprintLength, n);
        for (Eigen::Index i = abs_rise; i < copy_end; ++i) {
            if (i > abs_fall) break;  // noise after the falling edge stays zero
            v.iq(i - abs_rise) = baseband.samples(i);
        }
        v.fs = baseband.fs;
        v.window_t = baseband.unified_start() + w * kDecisionWindowSec;
        out.push_back(std::move(v));
    }
    return out;
}

RFCapture prepare_for_tdoa(const RFCapture& cap) {
    cap.validate();
    if (cap.fs < kTdoaRate * (1.0 - 1e-9)) {
        throw InvalidArgument("prepare_for_tdoa requires fs >= 10 MHz");
    }

    RFCapture out;
    out.fs = kTdoaRate;
    out.f_center = cap.f_center;
    out.t0 = cap.t0;
    out.sensor_id = cap.sensor_id;
    out.clock_offset = cap.clock_offset;

    double lo = 0.0, hi = 0.0, floor = 0.0;
    const bool occupied = detail::occupied_band(cap.samples, cap.fs, &lo, &hi, &floor);
    const RationalRate rate = reduce_ratio(cap.fs, kTdoaRate);
    const Eigen::Index out_n = (cap.samples.size() * rate.up + rate.down - 1) / rate.down;
    if (!occupied) {
        out.samples = Eigen::VectorXcd::Zero(out_n);
        return out;
    }

    const double transition = std::max((hi - lo) * 0.1, 0.02 * cap.fs) / cap.fs;
    const int taps = fir_taps_for_transition(transition);
    Eigen::VectorXcd filtered = fir_apply_same(
        cap.samples, fir_bandpass_complex(taps, (lo - 0.01 * cap.fs) / cap.fs,
                                          (hi + 0.01 * cap.fs) / cap.fs));
    out.samples = rate.up == 1 && rate.down == 1 ? std::move(filtered)
                                                 : resample_rational(filtered, rate.up, rate.down);

    // Gate decision windows below the noise floor + 6 dB.
    const int win = static_cast<int>(std::llround(kDecisionWindowSec * kTdoaRate));
    const int nwin = static_cast<int>(out.samples.size() / win);
    if (nwin > 0) {
        std::vector<double> energies(nwin);
        for (int w = 0; w < nwin; ++w) {
            energies[w] = out.samples.segment(static_cast<Eigen::Index>(w) * win, win).squaredNorm() / win;
        }
        std::vector<double> sorted = energies;
        const double wfloor = percentile(std::move(sorted), 0.10);
        const double thresh = std::max(wfloor * kEdgeSnr, 1e-12 * *std::max_element(energies.begin(), energies.end()));
        for (int w = 0; w < nwin; ++w) {
            if (energies[w] < thresh) {
                out.samples.segment(static_cast<Eigen::Index>(w) * win, win).setZero();
            }
        }
    }
    return out;
}

}  // namespace simtrack
