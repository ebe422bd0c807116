// SPDX-License-Identifier: Apache-2.0
//
// STFT front-end. Each channel is split into hopped, tapered frames; every
// frame/bin is represented by three real channels: log(1 + |X|) and the
// phase as a (cos, sin) pair. Phases are referenced to the global time
// origin (each frame's spectrum is demodulated by its start offset), so a
// stationary tone keeps a stable phase across frames and phase information
// survives pooling over the frame axis. The transform sizes here are small
// (64-point windows), so a tabled direct DFT is used rather than an FFT
// dependency.

#pragma once

#include <Eigen/Core>

#include "mavloc/core.hpp"

namespace mavloc {

enum class Taper { hann, rect };

struct FeatureConfig {
  int window = 64;
  int hop = 32;
  Taper taper = Taper::hann;
  // Optional strided averaging front-end: groups of `frame_stride` feature
  // frames are averaged. 1 = off.
  int frame_stride = 1;
  // When set, the phase channels hold (re, im)/(1 + |X|) instead of the
  // unit phasor: near-empty bins then contribute near-zero phase channels
  // instead of numerically meaningless unit vectors. The estimator enables
  // this for its input encoding.
  bool magnitude_gated_phase = false;

  void validate() const {
    if (window < 2 || hop < 1 || hop > window) throw ConfigError("FeatureConfig: need 0 < hop <= window");
    if (frame_stride < 1) throw ConfigError("FeatureConfig: frame_stride must be >= 1");
  }

  int bins() const { return window / 2 + 1; }
  int feature_dim() const { return 3 * bins(); }
};

inline int stft_base_frames(int n_samples, const FeatureConfig& cfg) {
  if (n_samples < cfg.window) throw TraceTooShort("stft: trace shorter than the analysis window");
  return (n_samples - cfg.window) / cfg.hop + 1;
}

inline int stft_frames(int n_samples, const FeatureConfig& cfg) {
  return stft_base_frames(n_samples, cfg) / cfg.frame_stride;
}

namespace detail {

inline constexpr double kPhaseEpsilon = 1e-12;  // |X| below this uses the zero-phase convention

struct DftPlan {
  Eigen::MatrixXd cos_table;  // bins x window
  Eigen::MatrixXd sin_table;
  Eigen::VectorXd window_values;

  explicit DftPlan(const FeatureConfig& cfg) {
    const int w = cfg.window;
    const int b = cfg.bins();
    cos_table.resize(b, w);
    sin_table.resize(b, w);
    window_values.resize(w);
    for (int n = 0; n < w; ++n) {
      window_values[n] =
          cfg.taper == Taper::hann ? 0.5 - 0.5 * std::cos(kTwoPi * n / (w - 1)) : 1.0;
      for (int k = 0; k < b; ++k) {
        cos_table(k, n) = std::cos(kTwoPi * k * n / w);
        sin_table(k, n) = std::sin(kTwoPi * k * n / w);
      }
    }
  }
};

}  // namespace detail

/// Feature tensor of one multichannel trace. Row (c, f) of `feat` holds the
/// frame's feature vector, laid out bin-major as [logmag, cos, sin] triples.
struct StftFeatures {
  int channels = 0;
  int frames = 0;       // after optional stride averaging
  int base_frames = 0;  // before averaging
  int bins = 0;
  Eigen::MatrixXd feat;  // (channels * frames) x (3 * bins)
  Eigen::MatrixXd re;    // (channels * base_frames) x bins, kept for the backward pass
  Eigen::MatrixXd im;    // (demodulated values)

  Eigen::VectorXd pooled() const { return feat.colwise().mean(); }

  /// Mean over frames, one row per channel.
  Eigen::MatrixXd pooled_per_channel() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(channels, feat.cols());
    for (int c = 0; c < channels; ++c) {
      for (int f = 0; f < frames; ++f) out.row(c) += feat.row(c * frames + f);
      out.row(c) /= frames;
    }
    return out;
  }
};

inline StftFeatures stft_features(const Eigen::MatrixXd& samples, const FeatureConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(samples.cols());
  const int channels = static_cast<int>(samples.rows());
  const int base_frames = stft_base_frames(n, cfg);
  const int frames = base_frames / cfg.frame_stride;
  if (frames < 1) throw TraceTooShort("stft: stride averaging leaves no frames");
  const detail::DftPlan plan(cfg);
  const int bins = cfg.bins();

  StftFeatures out;
  out.channels = channels;
  out.frames = frames;
  out.base_frames = base_frames;
  out.bins = bins;
  out.re.resize(channels * base_frames, bins);
  out.im.resize(channels * base_frames, bins);
  Eigen::MatrixXd base_feat(channels * base_frames, 3 * bins);

  Eigen::VectorXd windowed(cfg.window);
  for (int c = 0; c < channels; ++c)
    for (int f = 0; f < base_frames; ++f) {
      const int row = c * base_frames + f;
      const int start = f * cfg.hop;
      for (int i = 0; i < cfg.window; ++i)
        windowed[i] = plan.window_values[i] * samples(c, start + i);
      for (int b = 0; b < bins; ++b) {
        const double re_raw = plan.cos_table.row(b).dot(windowed);
        const double im_raw = -plan.sin_table.row(b).dot(windowed);
        // Demodulate by the frame offset: multiply by exp(-i*2*pi*b*start/W).
        const double theta = kTwoPi * b * start / cfg.window;
        const double ct = std::cos(theta), st = std::sin(theta);
        const double re = ct * re_raw + st * im_raw;
        const double im = -st * re_raw + ct * im_raw;
        out.re(row, b) = re;
        out.im(row, b) = im;
        const double mag = std::sqrt(re * re + im * im);
        base_feat(row, 3 * b) = std::log1p(mag);
        if (cfg.magnitude_gated_phase) {
          base_feat(row, 3 * b + 1) = re / (1.0 + mag);
          base_feat(row, 3 * b + 2) = im / (1.0 + mag);
        } else if (mag > detail::kPhaseEpsilon) {
          base_feat(row, 3 * b + 1) = re / mag;
          base_feat(row, 3 * b + 2) = im / mag;
        } else {
          base_feat(row, 3 * b + 1) = 1.0;
          base_feat(row, 3 * b + 2) = 0.0;
        }
      }
    }

  if (cfg.frame_stride == 1) {
    out.feat = std::move(base_feat);
  } else {
    out.feat.setZero(channels * frames, 3 * bins);
    for (int c = 0; c < channels; ++c)
      for (int f = 0; f < frames; ++f) {
        for (int s = 0; s < cfg.frame_stride; ++s)
          out.feat.row(c * frames + f) += base_feat.row(c * base_frames + f * cfg.frame_stride + s);
        out.feat.row(c * frames + f) /= cfg.frame_stride;
      }
  }
  return out;
}

/// Adjoint of `pooled_per_channel(stft_features(samples))`: maps a per-channel
/// cotangent (channels x 3*bins) back to the trace samples. The feature
/// nonlinearities are differentiated at the stored (re, im) values; bins at
/// the zero-phase convention contribute no gradient.
inline Eigen::MatrixXd stft_pooled_backward(const StftFeatures& ft, const FeatureConfig& cfg,
                                            int n_samples, const Eigen::MatrixXd& dpooled) {
  if (dpooled.rows() != ft.channels || dpooled.cols() != ft.feat.cols())
    throw ShapeMismatch("stft_pooled_backward: cotangent shape mismatch");
  const detail::DftPlan plan(cfg);
  Eigen::MatrixXd dsamples = Eigen::MatrixXd::Zero(ft.channels, n_samples);
  // Mean over frames then optional frame averaging: every base frame of a
  // channel receives the same cotangent.
  const double scale = 1.0 / (static_cast<double>(ft.frames) * cfg.frame_stride);
  const int used_base = ft.frames * cfg.frame_stride;

  Eigen::VectorXd dwindowed(cfg.window);
  for (int c = 0; c < ft.channels; ++c)
    for (int f = 0; f < used_base; ++f) {
      const int row = c * ft.base_frames + f;
      const int start = f * cfg.hop;
      dwindowed.setZero();
      for (int b = 0; b < ft.bins; ++b) {
        const double re = ft.re(row, b);
        const double im = ft.im(row, b);
        const double mag = std::sqrt(re * re + im * im);
        const double dlog = dpooled(c, 3 * b) * scale;
        const double dcos = dpooled(c, 3 * b + 1) * scale;
        const double dsin = dpooled(c, 3 * b + 2) * scale;
        double dre, dim;
        if (cfg.magnitude_gated_phase) {
          if (mag <= detail::kPhaseEpsilon) {  // linear regime of (re, im)/(1 + mag)
            dre = dcos;
            dim = dsin;
          } else {
            const double g = 1.0 / (1.0 + mag);
            const double h = 1.0 / (mag * (1.0 + mag) * (1.0 + mag));
            dre = dlog * re / (mag * (1.0 + mag)) + dcos * (g - re * re * h) - dsin * re * im * h;
            dim = dlog * im / (mag * (1.0 + mag)) - dcos * re * im * h + dsin * (g - im * im * h);
          }
        } else {
          if (mag <= detail::kPhaseEpsilon) continue;
          const double mag3 = mag * mag * mag;
          dre = dlog * re / (mag * (1.0 + mag)) + dcos * (im * im) / mag3 - dsin * (re * im) / mag3;
          dim = dlog * im / (mag * (1.0 + mag)) - dcos * (re * im) / mag3 + dsin * (re * re) / mag3;
        }
        // Undo the frame demodulation (its adjoint is the inverse rotation).
        const double theta = kTwoPi * b * start / cfg.window;
        const double ct = std::cos(theta), st = std::sin(theta);
        const double dre_raw = ct * dre - st * dim;
        const double dim_raw = st * dre + ct * dim;
        dwindowed +=
            dre_raw * plan.cos_table.row(b).transpose() - dim_raw * plan.sin_table.row(b).transpose();
      }
      for (int i = 0; i < cfg.window; ++i)
        dsamples(c, start + i) += plan.window_values[i] * dwindowed[i];
    }
  return dsamples;
}

}  // namespace mavloc
