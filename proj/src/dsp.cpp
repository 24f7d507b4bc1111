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

#include "simtrack/dsp.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numeric>

#include "simtrack/errors.hpp"

namespace simtrack {

namespace {
constexpr double kPi = 3.14159265358979323846;

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

double blackman(int n, int num_taps) {
    const double a = 2.0 * kPi * n / (num_taps - 1);
    return 0.42 - 0.5 * std::cos(a) + 0.08 * std::cos(2.0 * a);
}
}  // namespace

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

Eigen::VectorXd fir_lowpass(int num_taps, double cutoff_norm) {
    if (num_taps % 2 == 0) ++num_taps;
    if (num_taps < 3) num_taps = 3;
    if (!(cutoff_norm > 0.0) || !(cutoff_norm < 0.5)) {
        throw InvalidArgument("fir cutoff must be in (0, 0.5) cycles/sample");
    }
    Eigen::VectorXd taps(num_taps);
    const int mid = (num_taps - 1) / 2;
    for (int n = 0; n < num_taps; ++n) {
        taps(n) = 2.0 * cutoff_norm * sinc(2.0 * cutoff_norm * (n - mid)) * blackman(n, num_taps);
    }
    taps /= taps.sum();  // unit DC gain
    return taps;
}

int fir_taps_for_transition(double transition_norm) {
    if (!(transition_norm > 0.0)) throw InvalidArgument("transition width must be > 0");
    int n = static_cast<int>(std::ceil(5.5 / transition_norm));
    if (n % 2 == 0) ++n;
    return std::max(n, 11);
}

Eigen::VectorXcd fir_bandpass_complex(int num_taps, double lo_norm, double hi_norm) {
    if (!(hi_norm > lo_norm)) throw InvalidArgument("band-pass needs hi > lo");
    const double half_bw = 0.5 * (hi_norm - lo_norm);
    const double center = 0.5 * (hi_norm + lo_norm);
    Eigen::VectorXd lp = fir_lowpass(num_taps, half_bw);
    Eigen::VectorXcd taps(lp.size());
    const int mid = (static_cast<int>(lp.size()) - 1) / 2;
    for (int n = 0; n < lp.size(); ++n) {
        const double phase = 2.0 * kPi * center * (n - mid);
        taps(n) = lp(n) * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    return taps;
}

template <typename TapVec>
static Eigen::VectorXcd apply_same_impl(const Eigen::Ref<const Eigen::VectorXcd>& x,
                                        const TapVec& taps) {
    const int n = static_cast<int>(x.size());
    const int nt = static_cast<int>(taps.size());
    const int gd = (nt - 1) / 2;
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n);
    for (int i = 0; i < n; ++i) {
        std::complex<double> acc(0.0, 0.0);
        const int k0 = std::max(0, gd - i);
        const int k1 = std::min(nt, n + gd - i);
        for (int k = k0; k < k1; ++k) acc += taps(k) * x(i + k - gd);
        y(i) = acc;
    }
    return y;
}

Eigen::VectorXcd fir_apply_same(const Eigen::Ref<const Eigen::VectorXcd>& x,
                                const Eigen::Ref<const Eigen::VectorXcd>& taps) {
    return apply_same_impl(x, taps);
}

Eigen::VectorXcd fir_apply_same(const Eigen::Ref<const Eigen::VectorXcd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& taps) {
    return apply_same_impl(x, taps);
}

Eigen::VectorXcd fir_decimate(const Eigen::Ref<const Eigen::VectorXcd>& x,
                              const Eigen::Ref<const Eigen::VectorXd>& taps, int factor) {
    if (factor < 1) throw InvalidArgument("decimation factor must be >= 1");
    const int n = static_cast<int>(x.size());
    const int nt = static_cast<int>(taps.size());
    const int gd = (nt - 1) / 2;
    const int out_n = (n + factor - 1) / factor;
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(out_n);
    for (int j = 0; j < out_n; ++j) {
        const int center = j * factor;
        std::complex<double> acc(0.0, 0.0);
        const int k0 = std::max(0, gd - center);
        const int k1 = std::min(nt, n + gd - center);
        for (int k = k0; k < k1; ++k) acc += taps(k) * x(center + k - gd);
        y(j) = acc;
    }
    return y;
}

RationalRate reduce_ratio(double fs_in, double fs_out) {
    const auto a = static_cast<std::int64_t>(std::llround(fs_in));
    const auto b = static_cast<std::int64_t>(std::llround(fs_out));
    if (a <= 0 || b <= 0 || std::abs(fs_in - a) > 1e-3 || std::abs(fs_out - b) > 1e-3) {
        throw InvalidArgument("sample rates must be integral Hz");
    }
    const std::int64_t g = std::gcd(a, b);
    return {b / g, a / g};
}

Eigen::VectorXcd resample_rational(const Eigen::Ref<const Eigen::VectorXcd>& x, std::int64_t up,
                                   std::int64_t down) {
    if (up < 1 || down < 1) throw InvalidArgument("resample factors must be >= 1");
    if (up == 1 && down == 1) return x;
    const double cutoff = 0.45 / static_cast<double>(std::max(up, down));
    const double transition = 0.1 / static_cast<double>(std::max(up, down));
    const int nt = fir_taps_for_transition(transition);
    Eigen::VectorXd taps = fir_lowpass(nt, cutoff);
    const int gd = (nt - 1) / 2;
    const std::int64_t n = x.size();
    const std::int64_t out_n = (n * up + down - 1) / down;
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(out_n);
    // Upsampled grid index m = j*down; nonzero input only where (m + k - gd) % up == 0.
    for (std::int64_t j = 0; j < out_n; ++j) {
        const std::int64_t m = j * down - gd;
        std::complex<double> acc(0.0, 0.0);
        std::int64_t k = m >= 0 ? (up - (m % up)) % up : (-m) % up;
        for (; k < nt; k += up) {
            const std::int64_t src = (m + k) / up;
            if (src < 0 || src >= n) continue;
            acc += taps(static_cast<int>(k)) * x(src);
        }
        y(j) = static_cast<double>(up) * acc;
    }
    return y;
}

Eigen::VectorXcd delay_fractional(const Eigen::Ref<const Eigen::VectorXcd>& x,
                                  double delay_samples, int half_taps) {
    const int n = static_cast<int>(x.size());
    const int int_delay = static_cast<int>(std::floor(delay_samples));
    const double frac = delay_samples - int_delay;
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n);
    if (frac == 0.0) {
        for (int i = 0; i < n; ++i) {
            const int src = i - int_delay;
            if (src >= 0 && src < n) y(i) = x(src);
        }
        return y;
    }
    const int nt = 2 * half_taps + 1;
    Eigen::VectorXd taps(nt);
    for (int k = 0; k < nt; ++k) {
        const double arg = (k - half_taps) - frac;
        taps(k) = sinc(arg) * blackman(k, nt);
    }
    taps /= taps.sum();
    for (int i = 0; i < n; ++i) {
        std::complex<double> acc(0.0, 0.0);
        for (int k = 0; k < nt; ++k) {
            const int src = i - int_delay - half_taps + k;  // y(i) ~ x(i - delay)
            if (src >= 0 && src < n) acc += taps(nt - 1 - k) * x(src);
        }
        y(i) = acc;
    }
    return y;
}

Eigen::VectorXcd fft_forward(const Eigen::Ref<const Eigen::VectorXcd>& x, int nfft) {
    Eigen::FFT<double> fft;
    Eigen::VectorXcd padded = Eigen::VectorXcd::Zero(nfft);
    padded.head(std::min<int>(nfft, static_cast<int>(x.size()))) =
        x.head(std::min<int>(nfft, static_cast<int>(x.size())));
    Eigen::VectorXcd out(nfft);
    fft.fwd(out, padded);
    return out;
}

Eigen::VectorXcd fft_inverse(const Eigen::Ref<const Eigen::VectorXcd>& x) {
    Eigen::FFT<double> fft;
    Eigen::VectorXcd out(x.size());
    Eigen::VectorXcd in = x;
    fft.inv(out, in);
    return out;
}

Eigen::VectorXd welch_psd(const Eigen::Ref<const Eigen::VectorXcd>& x, int nfft) {
    const int n = static_cast<int>(x.size());
    if (n < nfft) nfft = std::max(8, next_pow2(n) / 2);
    Eigen::VectorXd window(nfft);
    for (int i = 0; i < nfft; ++i) window(i) = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (nfft - 1));
    const int hop = nfft / 2;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(nfft);
    int segments = 0;
    Eigen::FFT<double> fft;
    for (int start = 0; start + nfft <= n; start += hop) {
        Eigen::VectorXcd seg = x.segment(start, nfft).cwiseProduct(window.cast<std::complex<double>>());
        Eigen::VectorXcd spec(nfft);
        fft.fwd(spec, seg);
        acc += spec.cwiseAbs2();
        ++segments;
    }
    if (segments == 0) {
        Eigen::VectorXcd seg = Eigen::VectorXcd::Zero(nfft);
        seg.head(n) = x;
        Eigen::VectorXcd spec(nfft);
        fft.fwd(spec, seg);
        acc = spec.cwiseAbs2();
        segments = 1;
    }
    acc /= static_cast<double>(segments);
    // fftshift so bin i maps to frequency (i - nfft/2) * fs / nfft
    Eigen::VectorXd shifted(nfft);
    const int half = nfft / 2;
    shifted.head(nfft - half) = acc.tail(nfft - half);
    shifted.tail(half) = acc.head(half);
    return shifted;
}

Eigen::VectorXd rrc_taps(double beta, int sps, int span_symbols) {
    if (sps < 1 || span_symbols < 1) throw InvalidArgument("rrc needs sps >= 1 and span >= 1");
    const int nt = 2 * span_symbols * sps + 1;
    Eigen::VectorXd taps(nt);
    for (int i = 0; i < nt; ++i) {
        const double t = (i - span_symbols * sps) / static_cast<double>(sps);
        double v;
        if (std::abs(t) < 1e-9) {
            v = 1.0 + beta * (4.0 / kPi - 1.0);
        } else if (std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-9) {
            v = beta / std::sqrt(2.0) *
                ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * beta)) +
                 (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * beta)));
        } else {
            const double num = std::sin(kPi * t * (1.0 - beta)) +
                               4.0 * beta * t * std::cos(kPi * t * (1.0 + beta));
            v = num / (kPi * t * (1.0 - std::pow(4.0 * beta * t, 2)));
        }
        taps(i) = v;
    }
    taps /= taps.norm();
    return taps;
}

}  // namespace simtrack
