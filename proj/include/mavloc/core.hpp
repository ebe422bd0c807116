// SPDX-License-Identifier: Apache-2.0
//
// Planar geometry, rigid poses and sampling clocks shared by every module.
// Conventions: angles in radians, wrapped to (-pi, pi]; distances in meters;
// rotation is counterclockwise-positive.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace mavloc {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kDefaultSpeedOfSound = 343.0;  // [m/s]

// Error taxonomy. The CLI maps categories onto process exit codes:
//   ConfigError -> 2, NumericError -> 3, IoError -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

struct DegenerateGeometry : NumericError {
  using NumericError::NumericError;
};
struct OutsideEnvironment : NumericError {
  using NumericError::NumericError;
};
struct NotRectangular : ConfigError {
  using ConfigError::ConfigError;
};
struct EmptyRegion : NumericError {
  using NumericError::NumericError;
};
struct UnknownPreset : ConfigError {
  using ConfigError::ConfigError;
};
struct TraceTooShort : ConfigError {
  using ConfigError::ConfigError;
};
struct ShapeMismatch : ConfigError {
  using ConfigError::ConfigError;
};
struct NonFiniteLoss : NumericError {
  using NumericError::NumericError;
};
struct ZeroSignalPower : NumericError {
  using NumericError::NumericError;
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double y = std::fmod(a + kPi, kTwoPi);
  if (y <= 0.0) y += kTwoPi;
  return y - kPi;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  constexpr double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  constexpr double squared_norm() const { return x * x + y * y; }
  double norm() const { return std::sqrt(x * x + y * y); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Rigid planar transform: counterclockwise rotation by `azimuth`, then
/// translation by `position`. The constructor wraps the azimuth.
struct Pose2 {
  double azimuth = 0.0;
  Vec2 position{};

  Pose2() = default;
  Pose2(double az, Vec2 t) : azimuth(wrap_angle(az)), position(t) {}
};

inline Vec2 pose_apply(const Pose2& pose, const Vec2& local) {
  const double c = std::cos(pose.azimuth);
  const double s = std::sin(pose.azimuth);
  return {c * local.x - s * local.y + pose.position.x,
          s * local.x + c * local.y + pose.position.y};
}

/// Composition a * b: apply b first, then a.
inline Pose2 pose_compose(const Pose2& a, const Pose2& b) {
  return {a.azimuth + b.azimuth, pose_apply(a, b.position)};
}

/// Audio/encoder sampling rates of one capture. Audio sample n is taken at
/// t = n / f_s; encoder samples cover the same wall-clock span at rate f_e.
struct SampleClock {
  double f_s = 0.0;   // audio sampling rate [Hz]
  double f_e = 0.0;   // encoder sampling rate [Hz]
  int n_samples = 0;  // audio samples per trace
  double c = kDefaultSpeedOfSound;

  SampleClock() = default;
  SampleClock(double fs, double fe, int n, double c_sound = kDefaultSpeedOfSound)
      : f_s(fs), f_e(fe), n_samples(n), c(c_sound) {
    validate();
  }

  void validate() const {
    if (!(f_s > 0.0) || !(f_e > 0.0)) throw ConfigError("SampleClock: sampling rates must be positive");
    if (n_samples < 1) throw ConfigError("SampleClock: need at least one sample");
    if (!(c > 0.0)) throw ConfigError("SampleClock: speed of sound must be positive");
  }

  int encoder_samples() const {
    return static_cast<int>(std::floor((n_samples - 1) / f_s * f_e)) + 1;
  }

  double duration() const { return n_samples / f_s; }
};

}  // namespace mavloc
