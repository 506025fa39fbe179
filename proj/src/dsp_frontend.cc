// src/dsp_frontend.cc

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

#include "assertkit/dsp_frontend.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "assertkit/common.hpp"

namespace assertkit {

namespace dsp_detail {

void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  check(n > 0 && (n & (n - 1)) == 0, "fft: size must be a power of two, got ", n);
  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

std::vector<double> dct2_basis(std::size_t n_keep, std::size_t n) {
  check(n_keep >= 1 && n_keep <= n, "dct2_basis: need 1 <= n_keep <= n");
  std::vector<double> basis(n_keep * n);
  for (std::size_t m = 0; m < n_keep; ++m) {
    const double s = m == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                            : std::sqrt(2.0 / static_cast<double>(n));
    for (std::size_t j = 0; j < n; ++j)
      basis[m * n + j] =
          s * std::cos(M_PI * (2.0 * j + 1.0) * m / (2.0 * static_cast<double>(n)));
  }
  return basis;
}

}  // namespace dsp_detail

namespace {

std::vector<double> make_window(WindowKind kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n == 1) return w;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = std::cos(2.0 * M_PI * i / static_cast<double>(n - 1));
    w[i] = kind == WindowKind::hamming ? 0.54 - 0.46 * c : 0.5 - 0.5 * c;
  }
  return w;
}

void validate(const StftConfig& cfg) {
  check(cfg.fft_size > 0 && (cfg.fft_size & (cfg.fft_size - 1)) == 0,
        "stft: fft_size must be a power of two");
  check(cfg.win_length > 0 && cfg.win_length <= cfg.fft_size,
        "stft: need 0 < win_length <= fft_size");
  check(cfg.hop_length > 0 && cfg.hop_length <= cfg.win_length,
        "stft: need 0 < hop_length <= win_length");
  check(cfg.floor_eps > 0, "stft: floor_eps must be positive");
}

}  // namespace

FeatureMatrix logspec(const AudioClip& clip, const StftConfig& cfg) {
  validate(cfg);
  const std::size_t len = clip.samples.size();
  check(len >= cfg.win_length, "logspec: clip too short (", len, " samples, window ",
        cfg.win_length, ")");
  const std::size_t n_frames = (len - cfg.win_length) / cfg.hop_length + 1;
  const std::size_t n_bins = cfg.fft_size / 2 + 1;
  const std::vector<double> window = make_window(cfg.window, cfg.win_length);

  FeatureMatrix fm;
  fm.kind = FeatureKind::logspec;
  fm.rows = n_frames;
  fm.cols = n_bins;
  fm.frame_hop = static_cast<double>(cfg.hop_length) / clip.sample_rate;
  fm.data.resize(n_frames * n_bins);

  std::vector<std::complex<double>> buf(cfg.fft_size);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t off = t * cfg.hop_length;
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < cfg.win_length; ++i)
      buf[i] = clip.samples[off + i] * window[i];
    dsp_detail::fft(buf, false);
    float* row = fm.data.data() + t * n_bins;
    for (std::size_t k = 0; k < n_bins; ++k)
      row[k] = static_cast<float>(std::log(std::norm(buf[k]) + cfg.floor_eps));
  }
  return fm;
}

namespace {

struct CqtPlan {
  std::vector<double> freqs;    // bin center frequencies, Hz
  std::vector<std::size_t> atom_len;
  std::size_t hop = 0;          // samples
  double q = 0.0;
};

CqtPlan plan_cqt(const CqccConfig& cfg, int sample_rate) {
  check(sample_rate > 0, "cqt: sample rate must be positive");
  const double nyquist = sample_rate / 2.0;
  const double f_max = cfg.f_max > 0 ? cfg.f_max : nyquist;
  const double f_min = cfg.f_min > 0 ? cfg.f_min : f_max / 512.0;  // 9 octaves below
  check(f_max <= nyquist + 1e-9, "cqt: f_max ", f_max, " above Nyquist ", nyquist);
  check(f_min > 0 && f_min < f_max, "cqt: need 0 < f_min < f_max");
  check(cfg.bins_per_octave > 0, "cqt: bins_per_octave must be positive");

  CqtPlan plan;
  const double octaves = std::log2(f_max / f_min);
  const std::size_t n_bins = static_cast<std::size_t>(
      std::lround(static_cast<double>(cfg.bins_per_octave) * octaves));
  check(n_bins >= 1, "cqt: frequency range spans no bins");
  plan.q = 1.0 / (std::pow(2.0, 1.0 / static_cast<double>(cfg.bins_per_octave)) - 1.0);
  plan.freqs.resize(n_bins);
  plan.atom_len.resize(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    plan.freqs[k] =
        f_min * std::pow(2.0, static_cast<double>(k) / static_cast<double>(cfg.bins_per_octave));
    plan.atom_len[k] = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(plan.q * sample_rate / plan.freqs[k])));
  }
  plan.hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(plan.q * sample_rate / f_max / 2.0)));
  return plan;
}

}  // namespace

CqtMatrix cqt(const AudioClip& clip, const CqccConfig& cfg) {
  check(!clip.samples.empty(), "cqt: empty clip");
  const CqtPlan plan = plan_cqt(cfg, clip.sample_rate);
  const std::size_t len = clip.samples.size();
  const std::size_t n_frames = (len - 1) / plan.hop + 1;
  const std::size_t n_bins = plan.freqs.size();

  CqtMatrix out;
  out.rows = n_frames;
  out.cols = n_bins;
  out.bin_freqs = plan.freqs;
  out.frame_hop = static_cast<double>(plan.hop) / clip.sample_rate;
  out.data.resize(n_frames * n_bins);

  // Precompute windowed atoms once; frames reuse them shifted.  Atoms longer
  // than the clip are evaluated over their in-clip support only and each
  // value is normalized by the in-support window sum.
  struct Atom {
    std::vector<double> re, im, win;
  };
  std::vector<Atom> atoms(n_bins);
  parallel_for(n_bins, [&](std::size_t k) {
    const std::size_t n = std::min(plan.atom_len[k], len);
    Atom& a = atoms[k];
    a.re.resize(n);
    a.im.resize(n);
    a.win = make_window(WindowKind::hamming, n);
    const double omega = 2.0 * M_PI * plan.freqs[k] / clip.sample_rate;
    for (std::size_t i = 0; i < n; ++i) {
      // phase referenced to the atom center so frames are comparable
      const double ph = omega * (static_cast<double>(i) - static_cast<double>(n) / 2.0);
      a.re[i] = a.win[i] * std::cos(ph);
      a.im[i] = -a.win[i] * std::sin(ph);
    }
  });

  parallel_for(n_frames, [&](std::size_t t) {
    const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(t * plan.hop);
    std::complex<double>* row = out.data.data() + t * n_bins;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const Atom& a = atoms[k];
      const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.re.size());
      const std::ptrdiff_t start = center - n / 2;
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -start);
      const std::ptrdiff_t hi =
          std::min<std::ptrdiff_t>(n, static_cast<std::ptrdiff_t>(len) - start);
      double acc_re = 0.0, acc_im = 0.0, wsum = 0.0;
      const float* x = clip.samples.data() + start;
      for (std::ptrdiff_t i = lo; i < hi; ++i) {
        const double s = x[i];
        acc_re += s * a.re[i];
        acc_im += s * a.im[i];
        wsum += a.win[i];
      }
      row[k] = wsum > 0 ? std::complex<double>(acc_re / wsum, acc_im / wsum)
                        : std::complex<double>(0.0, 0.0);
    }
  });
  return out;
}

FeatureMatrix cqcc(const AudioClip& clip, const CqccConfig& cfg) {
  check(cfg.floor_eps > 0, "cqcc: floor_eps must be positive");
  check(cfg.resample_points > 0, "cqcc: resample_points must be positive");
  const CqtMatrix q = cqt(clip, cfg);

  const std::size_t n_bins = q.cols;
  const double f_lo = q.bin_freqs.front();
  const double f_hi_nominal =
      f_lo * std::pow(2.0, static_cast<double>(n_bins) /
                               static_cast<double>(cfg.bins_per_octave));
  const double octaves = std::log2(f_hi_nominal / f_lo);
  const std::size_t n_uniform = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::lround(octaves * cfg.resample_points)));
  check(cfg.n_ceps >= 1 && cfg.n_ceps <= n_uniform,
        "cqcc: n_ceps must be in [1, number of uniform samples]");

  // Uniform (linear-Hz) grid over [f_lo, f_last]; values linearly
  // interpolated from the geometric CQT bins.
  const double f_last = q.bin_freqs.back();
  std::vector<double> grid(n_uniform);
  for (std::size_t j = 0; j < n_uniform; ++j)
    grid[j] = f_lo + (f_last - f_lo) * static_cast<double>(j) /
                         static_cast<double>(n_uniform - 1);

  const std::size_t n_keep = cfg.include_c0 ? cfg.n_ceps : cfg.n_ceps + 1;
  const std::vector<double> dct = dsp_detail::dct2_basis(n_keep, n_uniform);

  FeatureMatrix fm;
  fm.kind = FeatureKind::cqcc;
  fm.rows = q.rows;
  fm.cols = cfg.n_ceps;
  fm.frame_hop = q.frame_hop;
  fm.data.resize(fm.rows * fm.cols);

  parallel_for(q.rows, [&](std::size_t t) {
    std::vector<double> logp(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k)
      logp[k] = std::log(std::norm(q.data[t * n_bins + k]) + cfg.floor_eps);

    std::vector<double> uniform(n_uniform);
    std::size_t k = 0;
    for (std::size_t j = 0; j < n_uniform; ++j) {
      const double f = grid[j];
      while (k + 1 < n_bins && q.bin_freqs[k + 1] <= f) ++k;
      if (k + 1 >= n_bins) {
        uniform[j] = logp[n_bins - 1];
      } else {
        const double f0 = q.bin_freqs[k], f1 = q.bin_freqs[k + 1];
        const double w = (f - f0) / (f1 - f0);
        uniform[j] = (1.0 - w) * logp[k] + w * logp[k + 1];
      }
    }

    float* row = fm.data.data() + t * fm.cols;
    const std::size_t first = cfg.include_c0 ? 0 : 1;
    for (std::size_t m = 0; m < cfg.n_ceps; ++m) {
      const double* basis = dct.data() + (m + first) * n_uniform;
      double acc = 0.0;
      for (std::size_t n = 0; n < n_uniform; ++n) acc += basis[n] * uniform[n];
      row[m] = static_cast<float>(acc);
    }
  });
  return fm;
}

namespace {

void put_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  check(f.good(), "truncated feature file: ", path);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_feature(const std::string& path, const FeatureMatrix& fm) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  check(f.good(), "cannot open for writing: ", path);
  f.write("AKFE", 4);
  put_u32(f, 1);  // version
  put_u32(f, static_cast<std::uint32_t>(fm.kind));
  put_u32(f, static_cast<std::uint32_t>(fm.rows));
  put_u32(f, static_cast<std::uint32_t>(fm.cols));
  static_assert(sizeof(double) == 8);
  f.write(reinterpret_cast<const char*>(&fm.frame_hop), 8);
  static_assert(sizeof(float) == 4);
  f.write(reinterpret_cast<const char*>(fm.data.data()),
          static_cast<std::streamsize>(fm.data.size() * 4));
  check(f.good(), "write failed: ", path);
}

FeatureMatrix load_feature(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "cannot open feature file: ", path);
  char magic[4];
  f.read(magic, 4);
  check(f.good() && std::memcmp(magic, "AKFE", 4) == 0, "not a feature file: ", path);
  const std::uint32_t version = get_u32(f, path);
  check(version == 1, "unsupported feature file version ", version, ": ", path);
  FeatureMatrix fm;
  const std::uint32_t kind = get_u32(f, path);
  check(kind <= 1, "bad feature kind in ", path);
  fm.kind = static_cast<FeatureKind>(kind);
  fm.rows = get_u32(f, path);
  fm.cols = get_u32(f, path);
  f.read(reinterpret_cast<char*>(&fm.frame_hop), 8);
  check(f.good(), "truncated feature file: ", path);
  fm.data.resize(fm.rows * fm.cols);
  f.read(reinterpret_cast<char*>(fm.data.data()),
         static_cast<std::streamsize>(fm.data.size() * 4));
  check(f.good(), "truncated feature file: ", path);
  return fm;
}

}  // namespace assertkit
