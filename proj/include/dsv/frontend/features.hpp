// Copyright 2026 The dsv Authors
//
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

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dsv/core/types.hpp"
#include "dsv/frontend/wav.hpp"

namespace dsv::frontend {

enum class CmvnMode { per_utterance, none };

struct FrontendConfig {
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  int num_mel_bins = 40;
  int num_cepstra = 19;
  double low_freq_hz = 20.0;
  double pre_emphasis = 0.97;
  double dither = 0.0;  // amplitude in [-1, 1] sample units; 0 disables
  unsigned dither_seed = 0;
  CmvnMode cmvn_mode = CmvnMode::per_utterance;

  void validate() const {
    if (!(frame_shift_ms > 0) || frame_length_ms < frame_shift_ms)
      throw ConfigError("frontend: need frame_length_ms >= frame_shift_ms > 0");
    if (num_cepstra < 1 || num_mel_bins < num_cepstra)
      throw ConfigError("frontend: need num_mel_bins >= num_cepstra >= 1");
    if (pre_emphasis < 0 || pre_emphasis >= 1) throw ConfigError("frontend: pre_emphasis must be in [0, 1)");
    if (dither < 0) throw ConfigError("frontend: dither must be non-negative");
  }
};

// Identifies the layout of a feature matrix. `splice` > 0 means each row is
// the concatenation of 2*splice+1 base rows.
struct FeatureKind {
  std::string base = "fbank";  // fbank | mfcc_e | mfcc_e_dd | dvector | embedding
  int base_dim = 40;
  int splice = 0;

  int dim() const { return base_dim * (2 * splice + 1); }

  std::string tag() const {
    std::string t = (base == "dvector" || base == "embedding") ? base : base + std::to_string(base_dim);
    if (splice > 0) t = "spliced" + std::to_string(splice) + "(" + t + ")";
    return t;
  }

  static FeatureKind parse(const std::string& tag) {
    FeatureKind k;
    std::string t = tag;
    if (t.rfind("spliced", 0) == 0) {
      auto open = t.find('(');
      if (open == std::string::npos || t.back() != ')') throw FormatError("bad feature kind '" + tag + "'");
      k.splice = std::stoi(t.substr(7, open - 7));
      t = t.substr(open + 1, t.size() - open - 2);
    }
    if (t == "dvector" || t == "embedding") {
      k.base = t;
      k.base_dim = 0;  // filled from the container's column count
      return k;
    }
    auto digits = t.find_first_of("0123456789");
    if (digits == std::string::npos || digits == 0) throw FormatError("bad feature kind '" + tag + "'");
    k.base = t.substr(0, digits);
    k.base_dim = std::stoi(t.substr(digits));
    if (k.base != "fbank" && k.base != "mfcc_e" && k.base != "mfcc_e_dd")
      throw FormatError("unknown feature kind '" + tag + "'");
    return k;
  }

  friend bool operator==(const FeatureKind&, const FeatureKind&) = default;
};

struct FeatureMatrix {
  Matrix frames;  // T x D
  double frame_period = 0.01;
  FeatureKind kind;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }

  void validate() const {
    if (frames.rows() < 1) throw UsageError("feature matrix has no frames");
    if (frames.cols() != kind.dim())
      throw UsageError("feature matrix width " + std::to_string(frames.cols()) + " does not match kind " +
                       kind.tag());
    if (!frames.allFinite()) throw UsageError("feature matrix contains non-finite values");
  }
};

// Sample counts derived from the millisecond settings at a given rate.
struct FrameGeometry {
  int frame_length = 0;
  int frame_shift = 0;
  int fft_size = 0;

  static FrameGeometry from(const FrontendConfig& cfg, int sample_rate) {
    FrameGeometry g;
    g.frame_length = static_cast<int>(std::lround(cfg.frame_length_ms * 1e-3 * sample_rate));
    g.frame_shift = static_cast<int>(std::lround(cfg.frame_shift_ms * 1e-3 * sample_rate));
    if (g.frame_length < 1 || g.frame_shift < 1) throw ConfigError("frame too short for the sample rate");
    g.fft_size = 1;
    while (g.fft_size < g.frame_length) g.fft_size <<= 1;
    return g;
  }
};

// 1 + floor((num_samples - frame_length) / frame_shift), or 0 when the clip
// cannot hold one frame.
inline long num_frames(long num_samples, int frame_length, int frame_shift) {
  if (num_samples < frame_length) return 0;
  return 1 + (num_samples - frame_length) / frame_shift;
}

inline double hz_to_mel(double hz) { return 1127.0 * std::log1p(hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * std::expm1(mel / 1127.0); }

namespace detail {

// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        auto u = a[i + k];
        auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

constexpr double kLogFloor = 1e-10;

inline double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

}  // namespace detail

// Triangular filters on the mel scale between low_freq_hz and Nyquist.
// Row m holds the weights of bin m over the fft_size/2+1 power-spectrum bins.
class MelBanks {
 public:
  MelBanks(int num_bins, int fft_size, int sample_rate, double low_freq_hz) {
    const double nyquist = 0.5 * sample_rate;
    if (low_freq_hz < 0 || low_freq_hz >= nyquist) throw ConfigError("mel low frequency out of range");
    const double mel_low = hz_to_mel(low_freq_hz);
    const double mel_high = hz_to_mel(nyquist);
    const double delta = (mel_high - mel_low) / (num_bins + 1);
    const int num_fft_bins = fft_size / 2 + 1;
    weights_ = Matrix::Zero(num_bins, num_fft_bins);
    centers_hz_.resize(num_bins);
    for (int m = 0; m < num_bins; ++m) {
      const double left = mel_low + m * delta;
      const double center = left + delta;
      const double right = center + delta;
      centers_hz_[m] = mel_to_hz(center);
      for (int k = 0; k < num_fft_bins; ++k) {
        const double mel = hz_to_mel(static_cast<double>(k) * sample_rate / fft_size);
        if (mel > left && mel < right)
          weights_(m, k) = mel <= center ? (mel - left) / delta : (right - mel) / delta;
      }
    }
  }

  const Matrix& weights() const { return weights_; }
  const std::vector<double>& centers_hz() const { return centers_hz_; }

 private:
  Matrix weights_;
  std::vector<double> centers_hz_;
};

namespace detail {

struct FrameAnalysis {
  Matrix power;                     // T x (fft_size/2 + 1)
  std::vector<double> log_energy;   // raw frame energy, before pre-emphasis
};

inline FrameAnalysis analyze_frames(const AudioClip& clip, const FrontendConfig& cfg) {
  cfg.validate();
  if (clip.sample_rate <= 0) throw UsageError("clip sample rate must be positive");
  const auto geom = FrameGeometry::from(cfg, clip.sample_rate);
  const long t = num_frames(static_cast<long>(clip.samples.size()), geom.frame_length, geom.frame_shift);
  if (t < 1)
    throw TooShortError("clip '" + clip.id + "' has " + std::to_string(clip.samples.size()) +
                        " samples, fewer than one frame (" + std::to_string(geom.frame_length) + ")");

  std::vector<double> window(geom.frame_length);
  for (int i = 0; i < geom.frame_length; ++i)
    window[i] = geom.frame_length == 1
                    ? 1.0
                    : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (geom.frame_length - 1));

  std::mt19937_64 dither_rng(cfg.dither_seed);
  std::uniform_real_distribution<double> dither_dist(-1.0, 1.0);

  FrameAnalysis out;
  const int bins = geom.fft_size / 2 + 1;
  out.power.resize(t, bins);
  out.log_energy.resize(t);
  std::vector<double> frame(geom.frame_length);
  std::vector<std::complex<double>> spec(geom.fft_size);
  for (long f = 0; f < t; ++f) {
    const auto* src = clip.samples.data() + f * geom.frame_shift;
    std::copy(src, src + geom.frame_length, frame.begin());
    if (cfg.dither > 0)
      for (auto& s : frame) s += cfg.dither * dither_dist(dither_rng);

    double mean = 0;
    for (double s : frame) mean += s;
    mean /= geom.frame_length;
    double energy = 0;
    for (auto& s : frame) {
      s -= mean;
      energy += s * s;
    }
    out.log_energy[f] = safe_log(energy);

    for (int i = geom.frame_length - 1; i > 0; --i) frame[i] -= cfg.pre_emphasis * frame[i - 1];
    frame[0] -= cfg.pre_emphasis * frame[0];

    std::fill(spec.begin(), spec.end(), std::complex<double>{});
    for (int i = 0; i < geom.frame_length; ++i) spec[i] = frame[i] * window[i];
    fft(spec);
    for (int k = 0; k < bins; ++k) out.power(f, k) = std::norm(spec[k]);
  }
  return out;
}

inline Matrix log_mel(const FrameAnalysis& a, const FrontendConfig& cfg, int sample_rate) {
  const auto geom = FrameGeometry::from(cfg, sample_rate);
  MelBanks banks(cfg.num_mel_bins, geom.fft_size, sample_rate, cfg.low_freq_hz);
  Matrix mel = a.power * banks.weights().transpose();
  return mel.unaryExpr([](double v) { return safe_log(v); });
}

}  // namespace detail

// Log mel filterbank energies, num_mel_bins wide (40 by default).
inline FeatureMatrix compute_fbank(const AudioClip& clip, const FrontendConfig& cfg) {
  auto analysis = detail::analyze_frames(clip, cfg);
  FeatureMatrix out;
  out.frames = detail::log_mel(analysis, cfg, clip.sample_rate);
  out.frame_period = cfg.frame_shift_ms * 1e-3;
  out.kind = FeatureKind{"fbank", cfg.num_mel_bins, 0};
  return out;
}

// Orthonormal DCT-II of the log mel energies, coefficients 1..num_cepstra,
// with the frame log energy appended as the last column.
inline FeatureMatrix compute_mfcc_e(const AudioClip& clip, const FrontendConfig& cfg) {
  auto analysis = detail::analyze_frames(clip, cfg);
  const Matrix mel = detail::log_mel(analysis, cfg, clip.sample_rate);
  const int m = cfg.num_mel_bins;
  const int c = cfg.num_cepstra;
  Matrix dct(m, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < m; ++i)
      dct(i, j) = std::sqrt(2.0 / m) * std::cos(std::numbers::pi * (j + 1) * (i + 0.5) / m);

  FeatureMatrix out;
  out.frames.resize(mel.rows(), c + 1);
  out.frames.leftCols(c) = mel * dct;
  for (Eigen::Index t = 0; t < mel.rows(); ++t) out.frames(t, c) = analysis.log_energy[t];
  out.frame_period = cfg.frame_shift_ms * 1e-3;
  out.kind = FeatureKind{"mfcc_e", c + 1, 0};
  return out;
}

namespace detail {

// Regression-window derivative with replicated boundaries:
// d_t = sum_{n=1..N} n (c_{t+n} - c_{t-n}) / (2 sum n^2).
inline Matrix regression_delta(const Matrix& in, int window) {
  const Eigen::Index t_count = in.rows();
  double denom = 0;
  for (int n = 1; n <= window; ++n) denom += 2.0 * n * n;
  Matrix out = Matrix::Zero(t_count, in.cols());
  for (Eigen::Index t = 0; t < t_count; ++t) {
    for (int n = 1; n <= window; ++n) {
      const auto fwd = std::min<Eigen::Index>(t + n, t_count - 1);
      const auto back = std::max<Eigen::Index>(t - n, 0);
      out.row(t) += n * (in.row(fwd) - in.row(back));
    }
  }
  return out / denom;
}

}  // namespace detail

// Appends first- and second-order regression deltas (window 2), tripling the
// width, e.g. 20 -> 60. The second order is the delta of the first.
inline FeatureMatrix add_deltas(const FeatureMatrix& feat, int order = 2) {
  if (order != 2) throw UsageError("add_deltas supports order 2 only");
  if (feat.kind.splice != 0) throw UsageError("add_deltas expects unspliced features");
  feat.validate();
  const Matrix d1 = detail::regression_delta(feat.frames, 2);
  const Matrix d2 = detail::regression_delta(d1, 2);
  FeatureMatrix out;
  out.frames.resize(feat.frames.rows(), 3 * feat.frames.cols());
  out.frames << feat.frames, d1, d2;
  out.frame_period = feat.frame_period;
  out.kind = feat.kind;
  if (out.kind.base == "mfcc_e") out.kind.base = "mfcc_e_dd";
  out.kind.base_dim *= 3;
  return out;
}

// Row t becomes rows t-k .. t+k concatenated, edges replicated; T unchanged.
inline Matrix splice_frames(const Matrix& in, int context) {
  if (context < 0) throw UsageError("splice context must be non-negative");
  const Eigen::Index t_count = in.rows();
  const Eigen::Index d = in.cols();
  Matrix out(t_count, d * (2 * context + 1));
  for (Eigen::Index t = 0; t < t_count; ++t)
    for (int j = -context; j <= context; ++j) {
      const auto src = std::clamp<Eigen::Index>(t + j, 0, t_count - 1);
      out.block(t, (j + context) * d, 1, d) = in.row(src);
    }
  return out;
}

inline FeatureMatrix splice(const FeatureMatrix& feat, int context) {
  if (feat.kind.splice != 0) throw UsageError("features are already spliced");
  FeatureMatrix out;
  out.frames = splice_frames(feat.frames, context);
  out.frame_period = feat.frame_period;
  out.kind = feat.kind;
  out.kind.splice = context;
  return out;
}

// Per-utterance mean and variance normalization. Columns whose variance is
// at most 1e-10 are only mean-normalized; constant columns become exactly 0.
inline FeatureMatrix cmvn(const FeatureMatrix& feat) {
  if (feat.frames.rows() < 2) throw UsageError("cmvn needs at least two frames");
  FeatureMatrix out = feat;
  const double n = static_cast<double>(feat.frames.rows());
  for (Eigen::Index j = 0; j < feat.frames.cols(); ++j) {
    auto col = out.frames.col(j);
    if (col.maxCoeff() == col.minCoeff()) {
      col.setZero();
      continue;
    }
    const double mean = col.sum() / n;
    col.array() -= mean;
    const double var = col.squaredNorm() / n;
    if (var > 1e-10) col /= std::sqrt(var);
  }
  return out;
}

// Front-end recipe consumed by both networks: log fbank, then per-utterance
// cmvn when enabled. Splicing happens inside the networks.
inline FeatureMatrix extract_model_features(const AudioClip& clip, const FrontendConfig& cfg) {
  auto feat = compute_fbank(clip, cfg);
  if (cfg.cmvn_mode == CmvnMode::per_utterance && feat.num_frames() >= 2) feat = cmvn(feat);
  return feat;
}

// 19 MFCC + log energy with deltas and double deltas (60-d).
inline FeatureMatrix extract_mfcc_features(const AudioClip& clip, const FrontendConfig& cfg) {
  auto feat = add_deltas(compute_mfcc_e(clip, cfg));
  if (cfg.cmvn_mode == CmvnMode::per_utterance && feat.num_frames() >= 2) feat = cmvn(feat);
  return feat;
}

}  // namespace dsv::frontend
