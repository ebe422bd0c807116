// SPDX-License-Identifier: Apache-2.0
//
// Multi-orientation aggregation: per-measurement estimates are combined by
// their geometric median (Weiszfeld iteration, initialized at the mean).
// The classical update is undefined at a data point, so an iterate landing
// on one is nudged by 1e-9 m in a fixed direction before the next update.

#pragma once

#include "mavloc/localizer.hpp"

namespace mavloc {

struct GeometricMedianResult {
  Vec2 point{};
  int iterations = 0;
  bool converged = false;
};

inline GeometricMedianResult geometric_median(const std::vector<Vec2>& points, double tol = 1e-6,
                                              int max_iter = 200) {
  if (points.empty()) throw ConfigError("geometric_median: no points");
  GeometricMedianResult res;
  Vec2 y{};
  for (const Vec2& p : points) y += p;
  y = y / static_cast<double>(points.size());

  for (int it = 1; it <= max_iter; ++it) {
    Vec2 probe = y;
    for (const Vec2& p : points) {
      if (distance(probe, p) < 1e-12) {
        probe = probe + Vec2{1e-9, 0.0};
        break;
      }
    }
    Vec2 num{};
    double denom = 0.0;
    for (const Vec2& p : points) {
      const double d = distance(probe, p);
      num += p / d;
      denom += 1.0 / d;
    }
    const Vec2 next = num / denom;
    const double moved = distance(next, y);
    y = next;
    res.iterations = it;
    if (moved < tol) {
      res.converged = true;
      break;
    }
  }
  res.point = y;
  return res;
}

/// Predicts a location from each measurement (orientation taken from the
/// measurement pose) and aggregates the estimates by geometric median.
inline Vec2 aggregate_estimates(const LocalizerModel& model, const std::vector<Measurement>& ms) {
  if (ms.empty()) throw ConfigError("aggregate_estimates: no measurements");
  std::vector<Vec2> estimates;
  estimates.reserve(ms.size());
  for (const Measurement& m : ms)
    estimates.push_back(predict(model, m.mics, m.phases, m.pose.azimuth));
  return geometric_median(estimates, 1e-6, 200).point;
}

}  // namespace mavloc
