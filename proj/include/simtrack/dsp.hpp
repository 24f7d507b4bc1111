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
#include <complex>
#include <cstdint>
#include <vector>

namespace simtrack {

// Blackman-windowed sinc low-pass; ~74 dB stopband, transition ~5.5/N cycles
// per sample. num_taps is forced odd so the group delay is integral.
Eigen::VectorXd fir_lowpass(int num_taps, double cutoff_norm);

/// Smallest odd tap count whose transition band is <= transition_norm.
int fir_taps_for_transition(double transition_norm);

/// Linear-phase complex band-pass covering [lo_norm, hi_norm] (cycles/sample,
/// may be negative); a modulated fir_lowpass, so the group delay is the same.
Eigen::VectorXcd fir_bandpass_complex(int num_taps, double lo_norm, double hi_norm);

/// Same-length filtering with the group delay removed: y[n] aligns with x[n].
/// Edges see zero padding.
Eigen::VectorXcd fir_apply_same(const Eigen::Ref<const Eigen::VectorXcd>& x,
                                const Eigen::Ref<const Eigen::VectorXcd>& taps);
Eigen::VectorXcd fir_apply_same(const Eigen::Ref<const Eigen::VectorXcd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& taps);

/// Group-delay-compensated FIR + downsample by an integer factor:
/// y[j] = sum_k taps[k] x[j*factor + k - (N-1)/2], so y[0] aligns with x[0].
Eigen::VectorXcd fir_decimate(const Eigen::Ref<const Eigen::VectorXcd>& x,
                              const Eigen::Ref<const Eigen::VectorXd>& taps, int factor);

struct RationalRate {
    std::int64_t up = 1;
    std::int64_t down = 1;
};

/// Reduced up/down ratio converting fs_in to fs_out. Throws InvalidArgument
/// when the rates are not rationally related (after rounding to 1 Hz).
RationalRate reduce_ratio(double fs_in, double fs_out);

/// Polyphase rational resampler (zero-stuff by up, low-pass, keep every
/// down-th). Output sample j corresponds to input time j*down/(up*fs_in);
/// group delay is compensated so y[0] aligns with x[0].
Eigen::VectorXcd resample_rational(const Eigen::Ref<const Eigen::VectorXcd>& x, std::int64_t up,
                                   std::int64_t down);

/// Band-limited fractional delay by a Blackman-windowed sinc interpolator.
Eigen::VectorXcd delay_fractional(const Eigen::Ref<const Eigen::VectorXcd>& x,
                                  double delay_samples, int half_taps = 16);

Eigen::VectorXcd fft_forward(const Eigen::Ref<const Eigen::VectorXcd>& x, int nfft);
Eigen::VectorXcd fft_inverse(const Eigen::Ref<const Eigen::VectorXcd>& x);

/// Hann-windowed averaged periodogram, fftshifted: bin i covers frequency
/// (i - nfft/2) * fs / nfft relative to the capture center. Linear power.
Eigen::VectorXd welch_psd(const Eigen::Ref<const Eigen::VectorXcd>& x, int nfft);

/// Root-raised-cosine pulse, unit energy, length 2*span*sps+1.
Eigen::VectorXd rrc_taps(double beta, int sps, int span_symbols);

int next_pow2(int n);

}  // namespace simtrack
