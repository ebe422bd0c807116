// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include "mavloc/core.hpp"

namespace mavloc {

/// Discrete-time microphone readings, one row per microphone (relative
/// pressure units). Column n was sampled at t = n / clock.f_s.
struct PressureTrace {
  Eigen::MatrixXd samples;  // mics x n_samples
  SampleClock clock;

  int mics() const { return static_cast<int>(samples.rows()); }
  int length() const { return static_cast<int>(samples.cols()); }
};

/// Discrete-time rotor encoder readings [rad], one row per rotor. Column n
/// was sampled at t = n / clock.f_e.
struct PhaseTrace {
  Eigen::MatrixXd samples;  // rotors x encoder_samples
  SampleClock clock;

  int rotors() const { return static_cast<int>(samples.rows()); }
  int length() const { return static_cast<int>(samples.cols()); }
};

}  // namespace mavloc
