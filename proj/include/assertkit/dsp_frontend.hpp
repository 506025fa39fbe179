// include/assertkit/dsp_frontend.hpp

// Copyright 2025  assertkit authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef ASSERTKIT_DSP_FRONTEND_HPP_
#define ASSERTKIT_DSP_FRONTEND_HPP_

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "assertkit/audio_io.hpp"

namespace assertkit {

enum class FeatureKind : std::uint32_t { logspec = 0, cqcc = 1 };

struct FeatureMatrix {
  std::vector<float> data;  // row-major, rows x cols
  std::size_t rows = 0;     // frames
  std::size_t cols = 0;     // coefficients (257 logspec, 30 cqcc)
  FeatureKind kind = FeatureKind::logspec;
  double frame_hop = 0.0;   // seconds

  float at(std::size_t t, std::size_t d) const { return data[t * cols + d]; }
  float& at(std::size_t t, std::size_t d) { return data[t * cols + d]; }
};

enum class WindowKind { hamming, hann };

struct StftConfig {
  std::size_t fft_size = 512;   // power of two; logspec dim = fft_size/2 + 1
  std::size_t win_length = 400;  // 25 ms at 16 kHz
  std::size_t hop_length = 160;  // 10 ms at 16 kHz
  WindowKind window = WindowKind::hamming;
  double floor_eps = 1e-12;
};

// Log power magnitude spectrogram: entry = log(|STFT|^2 + floor_eps).
// No VAD, no normalization of any kind.  Frames: floor((len-win)/hop)+1,
// no padding at the edges; errors if the clip is shorter than one window.
FeatureMatrix logspec(const AudioClip& clip, const StftConfig& cfg);

struct CqccConfig {
  std::size_t bins_per_octave = 96;
  double f_min = 0.0;            // 0 -> f_max / 2^9
  double f_max = 0.0;            // 0 -> sample_rate / 2
  std::size_t n_ceps = 30;       // includes c0
  bool include_c0 = true;
  std::size_t resample_points = 96;  // uniform points per octave
  double floor_eps = 1e-12;
};

struct CqtMatrix {
  std::vector<std::complex<double>> data;  // row-major, frames x bins
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> bin_freqs;  // Hz, geometric, size cols
  double frame_hop = 0.0;         // seconds
};

// Constant-Q transform, computed directly in the time domain: bin k is the
// inner product of the clip with a Hamming-windowed complex exponential atom
// of length round(Q*fs/f_k), Q = 1/(2^(1/B)-1), centered on the frame and
// normalized by the in-support window sum.  Frames are hopped at half the
// shortest atom length.
CqtMatrix cqt(const AudioClip& clip, const CqccConfig& cfg);

// CQCC: |CQT|^2 -> log(.+eps) -> linear interpolation of the log spectrum
// onto resample_points-per-octave uniformly spaced frequencies -> orthonormal
// DCT-II -> first n_ceps coefficients (c0 included).  No CMVN.
FeatureMatrix cqcc(const AudioClip& clip, const CqccConfig& cfg);

// Feature archive container: "AKFE", u32 version, u32 kind, u32 rows,
// u32 cols, f64 frame_hop, then rows*cols float32 little-endian row-major.
void save_feature(const std::string& path, const FeatureMatrix& fm);
FeatureMatrix load_feature(const std::string& path);

namespace dsp_detail {

// In-place iterative radix-2 FFT; size must be a power of two.  Exposed for
// the naive-DFT oracle in tests.
void fft(std::vector<std::complex<double>>& a, bool inverse);

// Orthonormal DCT-II basis, n_keep x n points row-major:
// basis[m][j] = s_m cos(pi (2j+1) m / (2n)), s_0 = sqrt(1/n), s_m = sqrt(2/n).
std::vector<double> dct2_basis(std::size_t n_keep, std::size_t n);

}  // namespace dsp_detail

}  // namespace assertkit

#endif  // ASSERTKIT_DSP_FRONTEND_HPP_
