// SPDX-License-Identifier: Apache-2.0
//
// Sensor and rotor-phase noise. Sensor noise is white Gaussian scaled to a
// target SNR against the trace's mean-square power. Phase noise is colored:
// white Gaussian shaped by a second-order low-pass (50 Hz cutoff at the
// encoder rate, standing in for a phase controller's tracking error), then
// scaled to the target SNR against the phase signal power.

#pragma once

#include <limits>

#include "mavloc/rng.hpp"
#include "mavloc/trace.hpp"

namespace mavloc {

inline constexpr double kSnrInfinite = std::numeric_limits<double>::infinity();
inline constexpr double kPhaseNoiseCutoffHz = 50.0;

inline double mean_square_power(const Eigen::MatrixXd& m) {
  return m.squaredNorm() / static_cast<double>(m.size());
}

/// Adds white Gaussian noise with variance signal_power / 10^(snr/10).
inline PressureTrace inject_sensor_noise(const PressureTrace& trace, double snr_db,
                                         std::mt19937_64& rng) {
  if (std::isinf(snr_db)) return trace;
  if (!std::isfinite(snr_db)) throw ConfigError("inject_sensor_noise: SNR must be finite or +inf");
  const double power = mean_square_power(trace.samples);
  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  PressureTrace out = trace;
  for (Eigen::Index m = 0; m < out.samples.rows(); ++m)
    for (Eigen::Index n = 0; n < out.samples.cols(); ++n) out.samples(m, n) += sigma * gaussian(rng);
  return out;
}

namespace detail {

/// Butterworth low-pass biquad applied causally along each row.
inline Eigen::MatrixXd lowpass_rows(const Eigen::MatrixXd& in, double cutoff_hz, double fs) {
  const double w0 = kTwoPi * cutoff_hz / fs;
  const double cw = std::cos(w0), sw = std::sin(w0);
  const double q = 1.0 / std::sqrt(2.0);
  const double alpha = sw / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = (1.0 - cw) / 2.0 / a0, b1 = (1.0 - cw) / a0, b2 = b0;
  const double a1 = -2.0 * cw / a0, a2 = (1.0 - alpha) / a0;

  Eigen::MatrixXd out(in.rows(), in.cols());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (Eigen::Index n = 0; n < in.cols(); ++n) {
      const double x = in(r, n);
      const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      out(r, n) = y;
      x2 = x1;
      x1 = x;
      y2 = y1;
      y1 = y;
    }
  }
  return out;
}

}  // namespace detail

/// Colored noise matrix sized like the sampled phase matrix, scaled so that
/// noise power / signal power = 10^(-snr/10). Throws ZeroSignalPower when
/// the phase signal is identically zero and the SNR is finite.
inline Eigen::MatrixXd phase_noise_matrix(const Eigen::MatrixXd& phase_samples, double f_e,
                                          double snr_db, std::mt19937_64& rng) {
  if (std::isinf(snr_db)) return Eigen::MatrixXd::Zero(phase_samples.rows(), phase_samples.cols());
  if (!std::isfinite(snr_db)) throw ConfigError("inject_phase_noise: SNR must be finite or +inf");
  const double signal_power = mean_square_power(phase_samples);
  if (signal_power <= 0.0)
    throw ZeroSignalPower("inject_phase_noise: phase signal is identically zero; an SNR gives no scale");

  Eigen::MatrixXd white(phase_samples.rows(), phase_samples.cols());
  for (Eigen::Index r = 0; r < white.rows(); ++r)
    for (Eigen::Index n = 0; n < white.cols(); ++n) white(r, n) = gaussian(rng);
  Eigen::MatrixXd colored = detail::lowpass_rows(white, kPhaseNoiseCutoffHz, f_e);

  const double target_power = signal_power * std::pow(10.0, -snr_db / 10.0);
  const double current = mean_square_power(colored);
  colored *= std::sqrt(target_power / current);
  return colored;
}

/// Perturbed phase samples with colored noise at the requested SNR.
inline PhaseTrace inject_phase_noise(const PhaseTrace& phases, double snr_db, std::mt19937_64& rng) {
  PhaseTrace out = phases;
  out.samples += phase_noise_matrix(phases.samples, phases.clock.f_e, snr_db, rng);
  return out;
}

enum class NoiseKind { sensor, phase };

/// Per-batch noisy-training schedule: each batch draws its SNR uniformly
/// from `levels_db`.
struct NoiseSchedule {
  NoiseKind kind = NoiseKind::sensor;
  std::vector<double> levels_db;
};

}  // namespace mavloc
