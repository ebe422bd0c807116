// SPDX-License-Identifier: Apache-2.0
//
// Single-rotor phased point-source model: a rotor is a fixed set of
// omnidirectional point sources, each emitting a sum of cosine harmonics of
// twice the shaft rate (two blades). Free-space propagation delays by d/c
// and attenuates by 1/(4*pi*d).

#pragma once

#include <cstdint>
#include <vector>

#include "mavloc/core.hpp"
#include "mavloc/optim.hpp"
#include "mavloc/rng.hpp"
#include "mavloc/trace.hpp"

namespace mavloc {

/// One cosine component alpha * cos(2*k*omega*t + psi). The harmonic index k
/// may be fractional (k = 0.5 captures motor noise below the blade rate).
struct Harmonic {
  double k = 1.0;
  double amplitude = 0.0;  // relative pressure units * m
  double phase = 0.0;      // [rad], wrapped to (-pi, pi]
};

struct PointSource {
  Vec2 position{};  // rotor coordinates [m]
  std::vector<Harmonic> harmonics;
};

struct RotorSourceModel {
  double omega = 0.0;  // shaft rate [rad/s]
  std::vector<PointSource> sources;
  // When true, reproduces the delay/gain that a literal reading of the
  // free-space impulse response with the shaft rate inside the delta would
  // give: delay d/(c*omega), gain 1/(4*pi*d*omega).
  bool legacy_delay = false;

  int parameter_count() const {
    int n = 0;
    for (const auto& s : sources) n += 2 * static_cast<int>(s.harmonics.size());
    return n;
  }
};

inline void validate(const RotorSourceModel& m) {
  if (!(m.omega > 0.0)) throw ConfigError("RotorSourceModel: omega must be positive");
  if (m.sources.empty()) throw ConfigError("RotorSourceModel: needs at least one source");
  for (const auto& s : m.sources) {
    if (s.harmonics.empty()) throw ConfigError("PointSource: needs at least one harmonic");
    double prev = 0.0;
    for (const auto& h : s.harmonics) {
      if (!(h.k > prev)) throw ConfigError("PointSource: harmonic indices must be positive and strictly increasing");
      if (!std::isfinite(h.amplitude)) throw ConfigError("PointSource: amplitude must be finite");
      prev = h.k;
    }
  }
}

/// Source signal a_s(t) = sum_k alpha_sk * cos(2*k*omega*t + psi_sk).
inline double eval_source_signal(const PointSource& s, double omega, double t) {
  double v = 0.0;
  for (const auto& h : s.harmonics) v += h.amplitude * std::cos(2.0 * h.k * omega * t + h.phase);
  return v;
}

inline constexpr double kMinSourceDistance = 1e-6;  // [m]

/// Free-space rotor pressure at x (rotor coordinates): each source's signal
/// shifted in time by phase_shift/omega plus the propagation delay.
inline double eval_rotor_field(const RotorSourceModel& m, const Vec2& x, double t,
                               double phase_shift = 0.0, double c = kDefaultSpeedOfSound) {
  const double t_mod = t - phase_shift / m.omega;
  double p = 0.0;
  for (const auto& s : m.sources) {
    const double d = distance(x, s.position);
    if (d <= kMinSourceDistance) throw DegenerateGeometry("eval_rotor_field: evaluation point coincides with a source");
    const double delay = m.legacy_delay ? d / (c * m.omega) : d / c;
    const double gain = m.legacy_delay ? 1.0 / (4.0 * kPi * d * m.omega) : 1.0 / (4.0 * kPi * d);
    p += gain * eval_source_signal(s, m.omega, t_mod - delay);
  }
  return p;
}

inline constexpr std::uint64_t kDefaultRotorSeed = 0x524f544f52ull;  // "ROTOR"

/// Deterministic surrogate for a fitted rotor: 256 sources on two concentric
/// circles (radii 0.23 m and 0.51 m, 128 points each), harmonics
/// k in {0.5, 1, 2, 3} with 1/k^2 amplitude decay (outer ring scaled 0.25)
/// and fixed-seed phases. 2048 parameters total.
inline RotorSourceModel default_rotor_model(double omega) {
  if (!(omega > 0.0)) throw ConfigError("default_rotor_model: omega must be positive");
  constexpr int kPointsPerRing = 128;
  constexpr double kRadii[2] = {0.23, 0.51};
  constexpr double kScales[2] = {1.0, 0.25};
  constexpr double kHarmonics[4] = {0.5, 1.0, 2.0, 3.0};

  auto rng = derive_stream(kDefaultRotorSeed, 0);
  RotorSourceModel m;
  m.omega = omega;
  m.sources.reserve(2 * kPointsPerRing);
  for (int ring = 0; ring < 2; ++ring) {
    for (int i = 0; i < kPointsPerRing; ++i) {
      const double angle = kTwoPi * i / kPointsPerRing;
      PointSource s;
      s.position = {kRadii[ring] * std::cos(angle), kRadii[ring] * std::sin(angle)};
      for (double k : kHarmonics) {
        Harmonic h;
        h.k = k;
        h.amplitude = kScales[ring] / (k * k);
        h.phase = wrap_angle(uniform01(rng) * kTwoPi);
        s.harmonics.push_back(h);
      }
      m.sources.push_back(std::move(s));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Fitting of (alpha, psi) to target pressure traces. Source positions are
// fixed geometry and are not optimized.

struct RotorFitTarget {
  Vec2 position{};      // measurement location in rotor coordinates
  PressureTrace trace;  // 1 x N samples on trace.clock
};

struct FitOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;
  int memory = 8;
};

struct RotorFitResult {
  RotorSourceModel model;
  double misfit = 0.0;  // final sum of squared residuals
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::VectorXd pack_rotor_params(const RotorSourceModel& m) {
  Eigen::VectorXd x(m.parameter_count());
  Eigen::Index i = 0;
  for (const auto& s : m.sources)
    for (const auto& h : s.harmonics) {
      x[i++] = h.amplitude;
      x[i++] = h.phase;
    }
  return x;
}

inline void unpack_rotor_params(const Eigen::VectorXd& x, RotorSourceModel& m) {
  Eigen::Index i = 0;
  for (auto& s : m.sources)
    for (auto& h : s.harmonics) {
      h.amplitude = x[i++];
      h.phase = x[i++];
    }
}

/// Sum of squared residuals over all targets and its gradient with respect
/// to the packed (alpha, psi) vector, using the closed-form derivatives of
/// the cosine terms.
inline double rotor_fit_objective(const RotorSourceModel& m, const std::vector<RotorFitTarget>& targets,
                                  Eigen::VectorXd* grad_out) {
  const int n_params = m.parameter_count();
  if (grad_out) grad_out->setZero(n_params);
  Eigen::VectorXd partials(n_params);  // d(pred)/d(param) for one sample
  double misfit = 0.0;
  for (const auto& tgt : targets) {
    const auto& clock = tgt.trace.clock;
    const int n_samples = tgt.trace.length();
    for (int n = 0; n < n_samples; ++n) {
      const double t = n / clock.f_s;
      double pred = 0.0;
      Eigen::Index pi = 0;
      for (const auto& s : m.sources) {
        const double d = distance(tgt.position, s.position);
        if (d <= kMinSourceDistance) throw DegenerateGeometry("fit_rotor_model: target coincides with a source");
        const double delay = m.legacy_delay ? d / (clock.c * m.omega) : d / clock.c;
        const double gain = m.legacy_delay ? 1.0 / (4.0 * kPi * d * m.omega) : 1.0 / (4.0 * kPi * d);
        for (const auto& h : s.harmonics) {
          const double arg = 2.0 * h.k * m.omega * (t - delay) + h.phase;
          const double ca = std::cos(arg);
          pred += gain * h.amplitude * ca;
          if (grad_out) {
            partials[pi] = gain * ca;
            partials[pi + 1] = -gain * h.amplitude * std::sin(arg);
          }
          pi += 2;
        }
      }
      const double r = pred - tgt.trace.samples(0, n);
      misfit += r * r;
      if (grad_out) grad_out->noalias() += (2.0 * r) * partials;
    }
  }
  return misfit;
}

}  // namespace detail

/// Nonlinear least-squares fit of harmonic amplitudes and phases to target
/// traces (L-BFGS with analytic gradients). Hitting the iteration cap is not
/// fatal: the best iterate is returned with converged = false.
inline RotorFitResult fit_rotor_model(const std::vector<RotorFitTarget>& targets,
                                      const RotorSourceModel& init, const FitOptions& opts = {}) {
  validate(init);
  if (targets.empty()) throw ConfigError("fit_rotor_model: no targets");
  for (const auto& t : targets) {
    if (t.trace.samples.rows() != 1) throw ShapeMismatch("fit_rotor_model: targets must be single-channel traces");
    if (!(t.position.norm() > 0.51)) throw ConfigError("fit_rotor_model: target positions must lie outside the 0.51 m source region");
  }

  RotorSourceModel work = init;
  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    detail::unpack_rotor_params(x, work);
    return detail::rotor_fit_objective(work, targets, &grad);
  };

  LbfgsOptions lopts;
  lopts.max_iterations = opts.max_iterations;
  lopts.gradient_tolerance = opts.gradient_tolerance;
  lopts.memory = opts.memory;
  const LbfgsResult res = lbfgs_minimize(objective, detail::pack_rotor_params(init), lopts);

  RotorFitResult out;
  out.model = init;
  detail::unpack_rotor_params(res.x, out.model);
  for (auto& s : out.model.sources)
    for (auto& h : s.harmonics) h.phase = wrap_angle(h.phase);
  out.misfit = res.value;
  out.iterations = res.iterations;
  out.converged = res.converged;
  return out;
}

}  // namespace mavloc
