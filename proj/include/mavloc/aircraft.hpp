// SPDX-License-Identifier: Apache-2.0
//
// Whole-aircraft field synthesis and microphone sampling.
//
// Every source term is a cosine in 2*k*(sigma_r*(omega*t - phi_r(t))) with a
// geometry-only phase offset, so the field at a fixed evaluation point
// factorizes as
//
//   p(t) = sum_r sum_k cos(2k u_r(t)) * C[r][k] + sin(2k u_r(t)) * S[r][k],
//   u_r(t) = sigma_r * (omega*t - phi_r(t)),
//
// where C and S absorb sources, image sources, reflection weights, distances
// and per-harmonic phases. The tables are built once per pose; each time
// sample then costs a handful of trig calls. Phase modulation is evaluated
// at the receiver time t (not retarded), which is what makes u_r independent
// of the propagation path.

#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <vector>

#include "mavloc/environment.hpp"
#include "mavloc/phasemod.hpp"
#include "mavloc/rotor.hpp"
#include "mavloc/trace.hpp"

namespace mavloc {

struct AircraftGeometry {
  std::array<Pose2, kNumRotors> rotor_transforms{};  // rotor -> aircraft coordinates
  std::array<int, kNumRotors> spin{1, 1, 1, 1};      // +1 counterclockwise, -1 clockwise
  // Clockwise rotors get their source layout mirrored across the rotor x
  // axis. The acoustic consequence of counter-rotation is not pinned down by
  // measurements, so the convention is switchable.
  bool mirror_counter_rotating = true;

  void validate() const {
    for (int s : spin)
      if (s != 1 && s != -1) throw ConfigError("AircraftGeometry: spin entries must be +1 or -1");
  }
};

struct MicArray {
  std::vector<Vec2> positions;  // aircraft coordinates

  void validate() const {
    if (positions.empty()) throw ConfigError("MicArray: needs at least one microphone");
    for (std::size_t i = 0; i < positions.size(); ++i)
      for (std::size_t j = i + 1; j < positions.size(); ++j)
        if (distance(positions[i], positions[j]) <= 1e-12)
          throw ConfigError("MicArray: microphone positions must be pairwise distinct");
  }
};

using RotorMask = std::array<bool, kNumRotors>;
inline constexpr RotorMask kAllRotors{true, true, true, true};

/// One simulated capture: the latent pose with its microphone and encoder
/// readings.
struct Measurement {
  Pose2 pose;
  PressureTrace mics;
  PhaseTrace phases;
};

// ---------------------------------------------------------------------------
// Anti-aliasing filter: linear-phase Hann-windowed sinc, unity DC gain,
// applied zero-phase by simulating kAaPad extra samples on both sides.

inline constexpr int kAaFilterTaps = 63;
inline constexpr int kAaPad = kAaFilterTaps / 2;
inline constexpr double kAaCutoffFraction = 0.45;  // of f_s

inline const std::array<double, kAaFilterTaps>& antialias_taps() {
  static const std::array<double, kAaFilterTaps> taps = [] {
    std::array<double, kAaFilterTaps> h{};
    double sum = 0.0;
    for (int i = 0; i < kAaFilterTaps; ++i) {
      const double m = i - kAaPad;
      const double x = 2.0 * kAaCutoffFraction * m;
      const double sinc = m == 0 ? 1.0 : std::sin(kPi * x) / (kPi * x);
      const double window = 0.5 - 0.5 * std::cos(kTwoPi * i / (kAaFilterTaps - 1));
      h[i] = 2.0 * kAaCutoffFraction * sinc * window;
      sum += h[i];
    }
    for (double& v : h) v /= sum;
    return h;
  }();
  return taps;
}

namespace detail {

inline void check_phase_compat(const PhaseParams& phases, const RotorSourceModel& rotor) {
  if (phases.rotors() != kNumRotors) throw ShapeMismatch("PhaseParams: expected four rotors");
  if (std::abs(phases.omega - rotor.omega) > 1e-9 * rotor.omega)
    throw ConfigError("PhaseParams and RotorSourceModel disagree on the shaft rate");
}

/// Geometry-only projection tables for a fixed pose and set of evaluation
/// points (environment coordinates).
class FieldEvaluator {
 public:
  FieldEvaluator(std::span<const Vec2> points, const Pose2& pose, const AircraftGeometry& geom,
                 const RotorSourceModel& rotor, const Environment& env, double c,
                 const RotorMask& active = kAllRotors)
      : omega_(rotor.omega), n_points_(static_cast<int>(points.size())), active_(active) {
    geom.validate();
    for (int r = 0; r < kNumRotors; ++r) spin_[r] = static_cast<double>(geom.spin[r]);

    // Unique harmonic indices across all sources.
    for (const auto& s : rotor.sources)
      for (const auto& h : s.harmonics) {
        bool found = false;
        for (double k : k_list_)
          if (k == h.k) {
            found = true;
            break;
          }
        if (!found) k_list_.push_back(h.k);
      }
    std::sort(k_list_.begin(), k_list_.end());
    const int nk = static_cast<int>(k_list_.size());
    cos_table_.assign(static_cast<std::size_t>(kNumRotors) * nk * n_points_, 0.0);
    sin_table_.assign(cos_table_.size(), 0.0);

    for (int r = 0; r < kNumRotors; ++r) {
      if (!active_[r]) continue;
      const Pose2 rotor_pose = pose_compose(pose, geom.rotor_transforms[r]);
      const double sigma = spin_[r];
      const bool mirror = geom.mirror_counter_rotating && geom.spin[r] < 0;
      for (const auto& src : rotor.sources) {
        Vec2 local = src.position;
        if (mirror) local.y = -local.y;
        const Vec2 in_env = pose_apply(rotor_pose, local);
        // No interior check here: evaluation-time rooms may be perturbed
        // versions of the room the geometry was laid out for.
        const auto images = detail::mirror_images(env, in_env, env.max_order);
        for (const auto& im : images) {
          for (int p = 0; p < n_points_; ++p) {
            const double d = distance(points[p], im.position);
            if (d <= kMinSourceDistance)
              throw DegenerateGeometry("drone field: evaluation point coincides with an image source");
            const double delay = rotor.legacy_delay ? d / (c * omega_) : d / c;
            const double base_gain =
                im.weight / (rotor.legacy_delay ? 4.0 * kPi * d * omega_ : 4.0 * kPi * d);
            for (const auto& h : src.harmonics) {
              const int j = harmonic_slot(h.k);
              const double chi = 2.0 * h.k * sigma * omega_ * delay - h.phase;
              const double g = base_gain * h.amplitude;
              const std::size_t idx = table_index(r, j, p);
              cos_table_[idx] += g * std::cos(chi);
              sin_table_[idx] += g * std::sin(chi);
            }
          }
        }
      }
    }
  }

  int points() const { return n_points_; }
  double omega() const { return omega_; }

  /// Pressure at every point at time t, given phase-modulation values phi[r].
  void eval(double t, const std::array<double, kNumRotors>& phi, double* out) const {
    for (int p = 0; p < n_points_; ++p) out[p] = 0.0;
    const int nk = static_cast<int>(k_list_.size());
    for (int r = 0; r < kNumRotors; ++r) {
      if (!active_[r]) continue;
      const double u = spin_[r] * (omega_ * t - phi[r]);
      for (int j = 0; j < nk; ++j) {
        const double arg = 2.0 * k_list_[j] * u;
        const double cu = std::cos(arg);
        const double su = std::sin(arg);
        const double* ct = &cos_table_[table_index(r, j, 0)];
        const double* st = &sin_table_[table_index(r, j, 0)];
        for (int p = 0; p < n_points_; ++p) out[p] += cu * ct[p] + su * st[p];
      }
    }
  }

  /// As eval, also writing d(out[p])/d(u_r) into dout_du (rotor-major,
  /// kNumRotors x points).
  void eval_with_du(double t, const std::array<double, kNumRotors>& phi, double* out,
                    double* dout_du) const {
    for (int p = 0; p < n_points_; ++p) out[p] = 0.0;
    for (int i = 0; i < kNumRotors * n_points_; ++i) dout_du[i] = 0.0;
    const int nk = static_cast<int>(k_list_.size());
    for (int r = 0; r < kNumRotors; ++r) {
      if (!active_[r]) continue;
      const double u = spin_[r] * (omega_ * t - phi[r]);
      for (int j = 0; j < nk; ++j) {
        const double two_k = 2.0 * k_list_[j];
        const double arg = two_k * u;
        const double cu = std::cos(arg);
        const double su = std::sin(arg);
        const double* ct = &cos_table_[table_index(r, j, 0)];
        const double* st = &sin_table_[table_index(r, j, 0)];
        double* du = dout_du + r * n_points_;
        for (int p = 0; p < n_points_; ++p) {
          out[p] += cu * ct[p] + su * st[p];
          du[p] += two_k * (-su * ct[p] + cu * st[p]);
        }
      }
    }
  }

 private:
  int harmonic_slot(double k) const {
    for (std::size_t j = 0; j < k_list_.size(); ++j)
      if (k_list_[j] == k) return static_cast<int>(j);
    throw NumericError("FieldEvaluator: harmonic index lookup failed");
  }
  std::size_t table_index(int r, int j, int p) const {
    return (static_cast<std::size_t>(r) * k_list_.size() + j) * n_points_ + p;
  }

  double omega_;
  int n_points_;
  RotorMask active_;
  std::array<double, kNumRotors> spin_{};
  std::vector<double> k_list_;
  std::vector<double> cos_table_, sin_table_;
};

/// phi values per rotor at time t, optionally overlaid with encoder-rate
/// noise (linearly interpolated, clamped at the trace ends).
inline std::array<double, kNumRotors> phase_values_at(const PhaseParams& phases, double t,
                                                      const Eigen::MatrixXd* noise, double f_e) {
  std::array<double, kNumRotors> out{};
  for (int r = 0; r < kNumRotors; ++r) out[r] = phi(phases, r, t);
  if (noise) {
    const int n = static_cast<int>(noise->cols());
    double pos = t * f_e;
    if (pos < 0.0) pos = 0.0;
    if (pos > n - 1.0) pos = n - 1.0;
    const int i0 = static_cast<int>(pos) == n - 1 ? n - 2 : static_cast<int>(pos);
    const double frac = pos - i0;
    for (int r = 0; r < kNumRotors; ++r)
      out[r] += (1.0 - frac) * (*noise)(r, i0) + frac * (*noise)(r, i0 + 1);
  }
  return out;
}

}  // namespace detail

/// Aircraft pressure field at a single point in environment coordinates:
/// superposition of the (possibly counter-rotating) rotor fields and their
/// image sources.
inline double drone_field(const Vec2& x, double t, const Pose2& pose, const PhaseParams& phases,
                          const AircraftGeometry& geom, const RotorSourceModel& rotor,
                          const Environment& env, double c = kDefaultSpeedOfSound,
                          const RotorMask& active = kAllRotors) {
  detail::check_phase_compat(phases, rotor);
  const detail::FieldEvaluator ev(std::span<const Vec2>(&x, 1), pose, geom, rotor, env, c, active);
  std::array<double, kNumRotors> ph{};
  for (int r = 0; r < kNumRotors; ++r) ph[r] = phi(phases, r, t);
  double out = 0.0;
  ev.eval(t, ph, &out);
  return out;
}

/// Reusable per-pose simulator: builds the projection tables once, then each
/// simulate() call only evaluates the time loop and the anti-alias filter.
class TraceSimulator {
 public:
  TraceSimulator(const Pose2& pose, const AircraftGeometry& geom, const RotorSourceModel& rotor,
                 const MicArray& mics, const Environment& env, const SampleClock& clock,
                 const RotorMask& active = kAllRotors)
      : clock_(clock), pose_(pose), spin_(geom.spin), n_mics_(static_cast<int>(mics.positions.size())) {
    clock.validate();
    mics.validate();
    mic_points_.reserve(mics.positions.size());
    for (const Vec2& m : mics.positions) mic_points_.push_back(pose_apply(pose, m));
    evaluator_.emplace(std::span<const Vec2>(mic_points_), pose, geom, rotor, env, clock.c, active);
  }

  /// Scratch space retained for the phase-gradient adjoint.
  struct Workspace {
    Eigen::MatrixXd raw;                 // mics x padded samples
    std::vector<Eigen::MatrixXd> dpdu;   // per rotor: mics x padded samples
    std::vector<double> times;           // padded sample times
    bool with_gradient = false;
  };

  PressureTrace simulate(const PhaseParams& phases, const Eigen::MatrixXd* phase_noise = nullptr) const {
    Workspace ws;
    return simulate_impl(phases, ws, false, phase_noise);
  }

  PressureTrace simulate_with_workspace(const PhaseParams& phases, Workspace& ws,
                                        const Eigen::MatrixXd* phase_noise = nullptr) const {
    return simulate_impl(phases, ws, true, phase_noise);
  }

  /// Adjoint of simulate with respect to the phase coefficients: given
  /// dL/d(trace samples), accumulates dL/d(beta) into grad (rotors x K).
  /// The anti-alias filter is linear, so its transpose is applied to the
  /// cotangent and combined with the raw per-sample dp/du.
  void accumulate_phase_gradient(const PhaseParams& phases, const Workspace& ws,
                                 const Eigen::MatrixXd& dl_dtrace, Eigen::MatrixXd& grad) const {
    if (!ws.with_gradient) throw NumericError("accumulate_phase_gradient: workspace lacks dp/du");
    const int n = clock_.n_samples;
    const int padded = n + 2 * kAaPad;
    const auto& h = antialias_taps();

    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(n_mics_, padded);
    for (int m = 0; m < n_mics_; ++m)
      for (int s = 0; s < n; ++s) {
        const double w = dl_dtrace(m, s);
        if (w == 0.0) continue;
        for (int tap = 0; tap < kAaFilterTaps; ++tap) mu(m, s + 2 * kAaPad - tap) += w * h[tap];
      }

    const int harmonics = phases.harmonics();
    for (int r = 0; r < kNumRotors; ++r) {
      Eigen::VectorXd q(padded);
      for (int j = 0; j < padded; ++j) {
        double acc = 0.0;
        for (int m = 0; m < n_mics_; ++m) acc += mu(m, j) * ws.dpdu[r](m, j);
        q[j] = acc;
      }
      for (int k = 1; k <= harmonics; ++k) {
        double acc = 0.0;
        for (int j = 0; j < padded; ++j)
          acc += q[j] * std::sin(kTwoPi * k * ws.times[j] / phases.period);
        grad(r, k - 1) += acc * (-spin_[r] / static_cast<double>(k));
      }
    }
  }

  const SampleClock& clock() const { return clock_; }
  int mics() const { return n_mics_; }

 private:
  PressureTrace simulate_impl(const PhaseParams& phases, Workspace& ws, bool with_gradient,
                              const Eigen::MatrixXd* phase_noise) const {
    if (phases.rotors() != kNumRotors) throw ShapeMismatch("PhaseParams: expected four rotors");
    const int n = clock_.n_samples;
    const int padded = n + 2 * kAaPad;

    ws.raw.resize(n_mics_, padded);
    ws.with_gradient = with_gradient;
    if (with_gradient) {
      ws.dpdu.assign(kNumRotors, Eigen::MatrixXd(n_mics_, padded));
      ws.times.resize(padded);
    }

    std::vector<double> out_col(n_mics_);
    std::vector<double> du_col(static_cast<std::size_t>(kNumRotors) * n_mics_);
    for (int j = 0; j < padded; ++j) {
      const double t = (j - kAaPad) / clock_.f_s;
      const auto ph = detail::phase_values_at(phases, t, phase_noise, clock_.f_e);
      if (with_gradient) {
        evaluator_->eval_with_du(t, ph, out_col.data(), du_col.data());
        ws.times[j] = t;
        for (int r = 0; r < kNumRotors; ++r)
          for (int m = 0; m < n_mics_; ++m) ws.dpdu[r](m, j) = du_col[r * n_mics_ + m];
      } else {
        evaluator_->eval(t, ph, out_col.data());
      }
      for (int m = 0; m < n_mics_; ++m) ws.raw(m, j) = out_col[m];
    }

    PressureTrace trace;
    trace.clock = clock_;
    trace.samples.resize(n_mics_, n);
    const auto& h = antialias_taps();
    for (int m = 0; m < n_mics_; ++m)
      for (int s = 0; s < n; ++s) {
        double acc = 0.0;
        for (int tap = 0; tap < kAaFilterTaps; ++tap) acc += h[tap] * ws.raw(m, s + 2 * kAaPad - tap);
        trace.samples(m, s) = acc;
      }
    return trace;
  }

  SampleClock clock_;
  Pose2 pose_;
  std::array<int, kNumRotors> spin_{};
  int n_mics_;
  std::vector<Vec2> mic_points_;
  std::optional<detail::FieldEvaluator> evaluator_;
};

/// Microphone trace of the aircraft at `pose`: the drone field sampled at the
/// transformed microphone positions through the anti-alias filter.
inline PressureTrace simulate_mics(const Pose2& pose, const PhaseParams& phases,
                                   const AircraftGeometry& geom, const RotorSourceModel& rotor,
                                   const MicArray& mics, const Environment& env,
                                   const SampleClock& clock, const RotorMask& active = kAllRotors) {
  detail::check_phase_compat(phases, rotor);
  return TraceSimulator(pose, geom, rotor, mics, env, clock, active).simulate(phases);
}

/// Encoder trace: phi_r sampled at t = n / f_e across the audio span.
inline PhaseTrace sample_encoder(const PhaseParams& phases, const SampleClock& clock) {
  clock.validate();
  const int n = clock.encoder_samples();
  PhaseTrace trace;
  trace.clock = clock;
  trace.samples.resize(phases.rotors(), n);
  for (int r = 0; r < phases.rotors(); ++r)
    for (int i = 0; i < n; ++i) trace.samples(r, i) = phi(phases, r, i / clock.f_e);
  return trace;
}

/// d(filtered mic sample)/d(beta_rk), mics x samples x rotors x K.
struct PhaseGradTensor {
  int mics = 0, samples = 0, rotors = 0, coeffs = 0;
  std::vector<double> data;

  double operator()(int m, int n, int r, int k) const {
    return data[((static_cast<std::size_t>(m) * samples + n) * rotors + r) * coeffs + k];
  }
  double& at(int m, int n, int r, int k) {
    return data[((static_cast<std::size_t>(m) * samples + n) * rotors + r) * coeffs + k];
  }
};

/// Analytic gradient of simulate_mics with respect to the phase
/// coefficients, passed through the same anti-alias filter as the samples.
inline PhaseGradTensor grad_mics_wrt_phase(const Pose2& pose, const PhaseParams& phases,
                                           const AircraftGeometry& geom, const RotorSourceModel& rotor,
                                           const MicArray& mics, const Environment& env,
                                           const SampleClock& clock,
                                           const RotorMask& active = kAllRotors) {
  detail::check_phase_compat(phases, rotor);
  TraceSimulator sim(pose, geom, rotor, mics, env, clock, active);
  TraceSimulator::Workspace ws;
  sim.simulate_with_workspace(phases, ws);

  const int n = clock.n_samples;
  const int n_mics = static_cast<int>(mics.positions.size());
  const int harmonics = phases.harmonics();
  const int padded = n + 2 * kAaPad;
  const auto& h = antialias_taps();

  PhaseGradTensor g;
  g.mics = n_mics;
  g.samples = n;
  g.rotors = kNumRotors;
  g.coeffs = harmonics;
  g.data.assign(static_cast<std::size_t>(n_mics) * n * kNumRotors * harmonics, 0.0);

  // Basis derivative d(phi_r)/d(beta_rk) = sin(2*pi*k*t/T_p)/k at padded times.
  Eigen::MatrixXd basis(padded, harmonics);
  for (int j = 0; j < padded; ++j)
    for (int k = 1; k <= harmonics; ++k)
      basis(j, k - 1) = std::sin(kTwoPi * k * ws.times[j] / phases.period) / k;

  for (int m = 0; m < n_mics; ++m)
    for (int r = 0; r < kNumRotors; ++r) {
      if (!active[r]) continue;
      const double sigma = geom.spin[r];
      for (int s = 0; s < n; ++s) {
        for (int k = 0; k < harmonics; ++k) {
          double acc = 0.0;
          for (int tap = 0; tap < kAaFilterTaps; ++tap) {
            const int j = s + 2 * kAaPad - tap;
            acc += h[tap] * ws.dpdu[r](m, j) * basis(j, k);
          }
          g.at(m, s, r, k) = -sigma * acc;
        }
      }
    }
  return g;
}

// ---------------------------------------------------------------------------
// Nominal configuration.

inline constexpr double kDefaultOmegaRps = 23.46;  // shaft rate [rev/s]

struct DefaultSetup {
  AircraftGeometry geom;
  MicArray mics;
  Environment env;
  SampleClock clock;
};

/// Nominal configuration: rotors in a 1.42 m square with counter-rotating
/// diagonal pairs, eight microphones on a 0.91 m circle, 5 m x 5 m room with
/// gamma = 0.5 and first-order reflections, 1025 samples spanning eight
/// revolutions at 23.46 rev/s.
inline DefaultSetup default_setup() {
  DefaultSetup d;
  const double half = 1.42 / 2.0;
  // Order: front-left, front-right, rear-left, rear-right (x forward, y left).
  d.geom.rotor_transforms = {Pose2(0.0, {half, half}), Pose2(0.0, {half, -half}),
                             Pose2(0.0, {-half, half}), Pose2(0.0, {-half, -half})};
  // Front-left and rear-right spin clockwise, the other diagonal pair
  // counter-clockwise.
  d.geom.spin = {-1, 1, 1, -1};

  for (int m = 0; m < 8; ++m) {
    const double a = kTwoPi * m / 8.0;
    d.mics.positions.push_back({0.91 * std::cos(a), 0.91 * std::sin(a)});
  }

  d.env = Environment({Vec2{0, 0}, Vec2{5, 0}, Vec2{5, 5}, Vec2{0, 5}}, 0.5, 1);

  const double f_s = 1025.0 * kDefaultOmegaRps / 8.0;
  const double f_e = 128.0 * kDefaultOmegaRps;
  d.clock = SampleClock(f_s, f_e, 1025, kDefaultSpeedOfSound);
  return d;
}

/// Everything needed to simulate a capture.
struct Scene {
  Environment env;
  AircraftGeometry geom;
  RotorSourceModel rotor;
  MicArray mics;
  SampleClock clock;
};

inline Scene default_scene() {
  const DefaultSetup d = default_setup();
  return {d.env, d.geom, default_rotor_model(kTwoPi * kDefaultOmegaRps), d.mics, d.clock};
}

inline PressureTrace simulate_mics(const Scene& scene, const Pose2& pose, const PhaseParams& phases,
                                   const RotorMask& active = kAllRotors) {
  return simulate_mics(pose, phases, scene.geom, scene.rotor, scene.mics, scene.env, scene.clock, active);
}

}  // namespace mavloc
