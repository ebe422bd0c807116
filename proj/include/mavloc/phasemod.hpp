// SPDX-License-Identifier: Apache-2.0
//
// Rotor phase modulation. The phase derivative is parametrized in a cosine
// basis so the phase itself is the sine series
//
//   phi_r(t) = sum_{k=1..K} (beta_rk / k) * sin(2*pi*k*t / T_p),
//
// which is periodic with period T_p, starts and ends at zero, and whose
// derivative integrates to zero over a period (no net thrust change).
// Derivatives are implemented as the exact calculus of phi; the
// `paper_literal_derivatives` switch in ConstraintConfig instead reproduces
// the same series without the 2*pi/T_p chain-rule factors (and with the
// printed sign on the second derivative) for comparison.

#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "mavloc/core.hpp"

namespace mavloc {

struct PhaseParams {
  Eigen::MatrixXd beta;  // rotors x K, [rad * (rad/s) scale of the basis]
  double period = 0.0;   // T_p [s]
  double omega = 0.0;    // nominal shaft rate [rad/s]

  int rotors() const { return static_cast<int>(beta.rows()); }
  int harmonics() const { return static_cast<int>(beta.cols()); }
};

inline constexpr int kDefaultPhaseHarmonics = 10;
inline constexpr int kNumRotors = 4;

/// Zero modulation with the conventional period T_p = 16*pi/omega
/// (eight nominal revolutions).
inline PhaseParams zero_phase_params(double omega, int harmonics = kDefaultPhaseHarmonics,
                                     int rotors = kNumRotors) {
  if (!(omega > 0.0)) throw ConfigError("zero_phase_params: omega must be positive");
  if (harmonics < 1 || rotors < 1) throw ConfigError("zero_phase_params: need at least one harmonic and rotor");
  PhaseParams p;
  p.beta = Eigen::MatrixXd::Zero(rotors, harmonics);
  p.period = 16.0 * kPi / omega;
  p.omega = omega;
  return p;
}

inline double phi(const PhaseParams& p, int rotor, double t) {
  double v = 0.0;
  for (int k = 1; k <= p.harmonics(); ++k)
    v += p.beta(rotor, k - 1) / k * std::sin(kTwoPi * k * t / p.period);
  return v;
}

/// Exact time derivative of phi.
inline double dphi(const PhaseParams& p, int rotor, double t) {
  double v = 0.0;
  for (int k = 1; k <= p.harmonics(); ++k)
    v += p.beta(rotor, k - 1) * (kTwoPi / p.period) * std::cos(kTwoPi * k * t / p.period);
  return v;
}

/// Exact second derivative of phi.
inline double ddphi(const PhaseParams& p, int rotor, double t) {
  double v = 0.0;
  for (int k = 1; k <= p.harmonics(); ++k)
    v -= p.beta(rotor, k - 1) * k * (kTwoPi / p.period) * (kTwoPi / p.period) *
         std::sin(kTwoPi * k * t / p.period);
  return v;
}

/// Printed-convention derivative: the cosine series without the 2*pi/T_p
/// chain-rule factor.
inline double dphi_literal(const PhaseParams& p, int rotor, double t) {
  double v = 0.0;
  for (int k = 1; k <= p.harmonics(); ++k)
    v += p.beta(rotor, k - 1) * std::cos(kTwoPi * k * t / p.period);
  return v;
}

/// Printed-convention second derivative: sum_k k*beta_k*sin(...).
inline double ddphi_literal(const PhaseParams& p, int rotor, double t) {
  double v = 0.0;
  for (int k = 1; k <= p.harmonics(); ++k)
    v += p.beta(rotor, k - 1) * k * std::sin(kTwoPi * k * t / p.period);
  return v;
}

struct ConstraintConfig {
  double omega_max = 8000.0;  // [rad/s]
  double alpha_max = 4000.0;  // [rad/s^2]
  double lambda_omega = 0.1;
  double lambda_alpha = 0.1;
  double lambda_thrust = 1.0;
  std::vector<double> kernel_sigmas{1.0, 2.0, 4.0};
  bool paper_literal_derivatives = false;

  void validate() const {
    if (!(omega_max > 0.0) || !(alpha_max > 0.0)) throw ConfigError("ConstraintConfig: limits must be positive");
    if (lambda_omega < 0.0 || lambda_alpha < 0.0 || lambda_thrust < 0.0)
      throw ConfigError("ConstraintConfig: weights must be non-negative");
  }
};

/// Uniform periodic grid over [0, T_p); t = T_p would duplicate t = 0.
inline std::vector<double> penalty_time_grid(double period, int points = 1024) {
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) grid[i] = period * i / points;
  return grid;
}

namespace detail {
inline double hinge(double v) { return v > 0.0 ? v : 0.0; }
}  // namespace detail

/// Angular-velocity hinge penalty: instantaneous velocity omega + dphi must
/// stay within [-omega_max, omega_max] on the grid, summed over rotors.
inline double penalty_omega(const PhaseParams& p, const ConstraintConfig& cfg,
                            const std::vector<double>& grid) {
  double total = 0.0;
  for (int r = 0; r < p.rotors(); ++r)
    for (double t : grid) {
      const double v = cfg.paper_literal_derivatives ? dphi_literal(p, r, t) : dphi(p, r, t);
      total += detail::hinge(v + p.omega - cfg.omega_max);
      total += detail::hinge(-cfg.omega_max - v - p.omega);
    }
  return total;
}

/// Angular-acceleration hinge penalty over the grid, summed over rotors.
inline double penalty_alpha(const PhaseParams& p, const ConstraintConfig& cfg,
                            const std::vector<double>& grid) {
  double total = 0.0;
  for (int r = 0; r < p.rotors(); ++r)
    for (double t : grid) {
      const double a = cfg.paper_literal_derivatives ? ddphi_literal(p, r, t) : ddphi(p, r, t);
      total += detail::hinge(a - cfg.alpha_max);
      total += detail::hinge(-cfg.alpha_max - a);
    }
  return total;
}

/// Low-pass kernel G(k): a sum of Gaussians of varying bandwidth.
inline double thrust_kernel(double k, const ConstraintConfig& cfg) {
  double g = 0.0;
  for (double sigma : cfg.kernel_sigmas) g += std::exp(-k * k / (2.0 * sigma * sigma));
  return g;
}

/// Zero-net-thrust penalty: energy of beta in the low frequencies.
inline double penalty_thrust(const PhaseParams& p, const ConstraintConfig& cfg) {
  double total = 0.0;
  for (int r = 0; r < p.rotors(); ++r)
    for (int k = 1; k <= p.harmonics(); ++k)
      total += thrust_kernel(k, cfg) * p.beta(r, k - 1) * p.beta(r, k - 1);
  return total;
}

struct PenaltyValue {
  double total = 0.0;
  double omega_term = 0.0;   // unweighted
  double alpha_term = 0.0;   // unweighted
  double thrust_term = 0.0;  // unweighted
  Eigen::MatrixXd gradient;  // d(total)/d(beta), rotors x K
};

/// Weighted physical-constraint penalty and its analytic gradient. The hinge
/// subgradient at an exact kink is taken as zero.
inline PenaltyValue penalty_total(const PhaseParams& p, const ConstraintConfig& cfg,
                                  const std::vector<double>& grid) {
  PenaltyValue out;
  out.gradient = Eigen::MatrixXd::Zero(p.rotors(), p.harmonics());
  const double w = kTwoPi / p.period;
  for (int r = 0; r < p.rotors(); ++r) {
    for (double t : grid) {
      const double v = cfg.paper_literal_derivatives ? dphi_literal(p, r, t) : dphi(p, r, t);
      const double a = cfg.paper_literal_derivatives ? ddphi_literal(p, r, t) : ddphi(p, r, t);
      const double hi_v = v + p.omega - cfg.omega_max;
      const double lo_v = -cfg.omega_max - v - p.omega;
      const double hi_a = a - cfg.alpha_max;
      const double lo_a = -cfg.alpha_max - a;
      out.omega_term += detail::hinge(hi_v) + detail::hinge(lo_v);
      out.alpha_term += detail::hinge(hi_a) + detail::hinge(lo_a);

      const double sign_v = (hi_v > 0.0 ? 1.0 : 0.0) - (lo_v > 0.0 ? 1.0 : 0.0);
      const double sign_a = (hi_a > 0.0 ? 1.0 : 0.0) - (lo_a > 0.0 ? 1.0 : 0.0);
      if (sign_v != 0.0 || sign_a != 0.0) {
        for (int k = 1; k <= p.harmonics(); ++k) {
          const double c = std::cos(kTwoPi * k * t / p.period);
          const double s = std::sin(kTwoPi * k * t / p.period);
          const double dv_db = cfg.paper_literal_derivatives ? c : w * c;
          const double da_db = cfg.paper_literal_derivatives ? k * s : -k * w * w * s;
          out.gradient(r, k - 1) += cfg.lambda_omega * sign_v * dv_db;
          out.gradient(r, k - 1) += cfg.lambda_alpha * sign_a * da_db;
        }
      }
    }
    for (int k = 1; k <= p.harmonics(); ++k) {
      out.thrust_term += thrust_kernel(k, cfg) * p.beta(r, k - 1) * p.beta(r, k - 1);
      out.gradient(r, k - 1) += cfg.lambda_thrust * 2.0 * thrust_kernel(k, cfg) * p.beta(r, k - 1);
    }
  }
  out.total = cfg.lambda_omega * out.omega_term + cfg.lambda_alpha * out.alpha_term +
              cfg.lambda_thrust * out.thrust_term;
  return out;
}

// ---------------------------------------------------------------------------
// Handcrafted modulations evaluated in the experiments, expressed in the sine
// basis. T_p = 16*pi/omega spans eight nominal revolutions, so a "period of
// eight revolutions" is the k = 1 basis function and "ten periods per eight
// revolutions" is k = 10.

inline PhaseParams preset(const std::string& name, double omega,
                          int harmonics = kDefaultPhaseHarmonics) {
  PhaseParams p = zero_phase_params(omega, harmonics);
  const double deg = kPi / 180.0;
  auto set = [&](int rotor, int k, double peak_rad) {
    if (k > harmonics) throw ConfigError("preset: needs at least " + std::to_string(k) + " harmonics");
    p.beta(rotor, k - 1) = k * peak_rad;  // phi peak is beta/k
  };

  if (name == "constant") {
    // all rotors at constant phase 0
  } else if (name == "slow_sine") {
    for (int r = 0; r < kNumRotors; ++r) set(r, 1, 20.0 * deg);
  } else if (name == "fast_sine") {
    for (int r = 0; r < kNumRotors; ++r) set(r, 10, 2.0 * deg);
  } else if (name == "gradual_freq") {
    // Rotor r raises the frequency by r steps and lowers the peak by r degrees.
    for (int r = 0; r < kNumRotors; ++r) set(r, 1 + r, (20.0 - r) * deg);
  } else if (name == "offset") {
    // sin(x + r*90deg) projected onto the sine-only basis keeps the
    // cos(r*90deg)*sin(x) component; the quadrature component has no
    // representation in this parametrization.
    for (int r = 0; r < kNumRotors; ++r) {
      const double proj = (r % 2 == 1) ? 0.0 : (r % 4 == 0 ? 1.0 : -1.0);  // cos(r*pi/2)
      if (proj != 0.0) set(r, 1, proj * 20.0 * deg);
    }
  } else {
    throw UnknownPreset("preset: unknown phase preset '" + name + "'");
  }
  return p;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"constant", "slow_sine", "fast_sine", "gradual_freq",
                                              "offset"};
  return names;
}

}  // namespace mavloc
