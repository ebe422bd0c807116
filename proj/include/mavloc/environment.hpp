// SPDX-License-Identifier: Apache-2.0
//
// Convex quadrilateral rooms and the image-source construction. Order-n
// image sources are mirrors of order n-1 sources across each wall, skipping
// the wall(s) that generated the parent (immediate back-reflection would
// reproduce the order n-2 source) and deduplicating coincident corner
// images. Order-n images carry weight gamma^n.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mavloc/core.hpp"

namespace mavloc {

struct Wall {
  Vec2 a{};
  Vec2 b{};
};

inline constexpr double kImageDedupTolerance = 1e-9;  // [m]

struct Environment {
  std::array<Vec2, 4> vertices{};  // counterclockwise
  double gamma = 0.0;              // wall reflection coefficient, [0, 1)
  int max_order = 0;

  Environment() = default;
  Environment(const std::array<Vec2, 4>& verts, double g, int order)
      : vertices(verts), gamma(g), max_order(order) {
    validate();
  }

  Wall wall(int i) const { return {vertices[i], vertices[(i + 1) % 4]}; }

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("Environment: gamma must be in [0, 1)");
    if (max_order < 0) throw ConfigError("Environment: max_order must be >= 0");
    for (int i = 0; i < 4; ++i) {
      const Vec2 e1 = vertices[(i + 1) % 4] - vertices[i];
      const Vec2 e2 = vertices[(i + 2) % 4] - vertices[(i + 1) % 4];
      if (!(e1.cross(e2) > 0.0))
        throw ConfigError("Environment: vertices must form a convex counterclockwise quadrilateral");
    }
  }

  bool contains(const Vec2& p) const {
    for (int i = 0; i < 4; ++i) {
      const Wall w = wall(i);
      if (!((w.b - w.a).cross(p - w.a) > 0.0)) return false;
    }
    return true;
  }

  double area() const {
    double twice = 0.0;
    for (int i = 0; i < 4; ++i) twice += vertices[i].cross(vertices[(i + 1) % 4]);
    return 0.5 * twice;
  }

  Vec2 centroid() const {
    // Shoelace centroid of the polygon interior.
    double twice_area = 0.0;
    Vec2 acc{};
    for (int i = 0; i < 4; ++i) {
      const Vec2& p = vertices[i];
      const Vec2& q = vertices[(i + 1) % 4];
      const double w = p.cross(q);
      twice_area += w;
      acc += (p + q) * w;
    }
    return acc / (3.0 * twice_area);
  }

  bool is_axis_aligned_rectangle(double tol = 1e-9) const {
    for (int i = 0; i < 4; ++i) {
      const Wall w = wall(i);
      const Vec2 e = w.b - w.a;
      if (std::abs(e.x) > tol && std::abs(e.y) > tol) return false;
    }
    return true;
  }
};

inline Vec2 reflect_point(const Vec2& p, const Wall& wall) {
  const Vec2 e = wall.b - wall.a;
  const double len2 = e.squared_norm();
  if (len2 <= 0.0) throw ConfigError("reflect_point: wall endpoints coincide");
  const Vec2 rel = p - wall.a;
  const double along = rel.dot(e) / len2;
  const Vec2 foot = wall.a + e * along;
  return foot + (foot - p);
}

struct ImageSource {
  Vec2 position{};
  int order = 0;
  double weight = 1.0;  // gamma^order
};

namespace detail {

// Image generation without the interior check; used directly by the field
// evaluator, where perturbation sweeps may legitimately place sources
// outside a mismatched evaluation-time room.
inline std::vector<ImageSource> mirror_images(const Environment& env, const Vec2& xi, int max_order) {
  struct Node {
    Vec2 position;
    std::uint8_t parent_walls;  // bitmask of walls that generated this image
  };
  std::vector<ImageSource> out;
  out.push_back({xi, 0, 1.0});

  std::vector<Node> frontier{{xi, 0}};
  double weight = 1.0;
  for (int order = 1; order <= max_order; ++order) {
    weight *= env.gamma;
    std::vector<Node> next;
    for (const Node& node : frontier) {
      for (int w = 0; w < 4; ++w) {
        if (node.parent_walls & (1u << w)) continue;
        const Vec2 mirrored = reflect_point(node.position, env.wall(w));
        bool merged = false;
        for (Node& existing : next) {
          if (distance(existing.position, mirrored) < kImageDedupTolerance) {
            existing.parent_walls |= (1u << w);
            merged = true;
            break;
          }
        }
        if (!merged) next.push_back({mirrored, static_cast<std::uint8_t>(1u << w)});
      }
    }
    for (const Node& node : next) out.push_back({node.position, order, weight});
    frontier = std::move(next);
  }
  return out;
}

}  // namespace detail

/// Image sources of a point at xi up to the requested order; order 0 is xi
/// itself with weight 1.
inline std::vector<ImageSource> image_sources(const Environment& env, const Vec2& xi, int max_order) {
  if (!env.contains(xi)) throw OutsideEnvironment("image_sources: source lies outside the environment");
  return detail::mirror_images(env, xi, max_order);
}

/// Uniform scaling of the room area by factor s about the room centroid.
inline Environment perturb_scale(const Environment& env, double s) {
  if (!(s > 0.0)) throw ConfigError("perturb_scale: factor must be positive");
  if (s == 1.0) return env;  // identity rows of robustness sweeps must match nominal bit-for-bit
  const double linear = std::sqrt(s);
  const Vec2 c = env.centroid();
  Environment out = env;
  for (auto& v : out.vertices) v = c + (v - c) * linear;
  return out;
}

/// Area-preserving aspect-ratio change of an axis-aligned rectangle:
/// width scales by sqrt(r), height by 1/sqrt(r).
inline Environment perturb_aspect(const Environment& env, double r) {
  if (!(r > 0.0)) throw ConfigError("perturb_aspect: ratio must be positive");
  if (!env.is_axis_aligned_rectangle()) throw NotRectangular("perturb_aspect: environment must be an axis-aligned rectangle");
  if (r == 1.0) return env;
  const double sx = std::sqrt(r);
  const Vec2 c = env.centroid();
  Environment out = env;
  for (auto& v : out.vertices) v = {c.x + (v.x - c.x) * sx, c.y + (v.y - c.y) / sx};
  return out;
}

/// Horizontal shear x' = x + y * tan(theta) turning a rectangle into a
/// parallelogram; the right angle becomes 90 - theta degrees. Area preserved.
inline Environment perturb_shear(const Environment& env, double theta_deg) {
  if (!(theta_deg >= 0.0 && theta_deg < 90.0)) throw ConfigError("perturb_shear: angle must be in [0, 90) degrees");
  if (!env.is_axis_aligned_rectangle()) throw NotRectangular("perturb_shear: environment must be an axis-aligned rectangle");
  if (theta_deg == 0.0) return env;
  const double shear = std::tan(theta_deg * kPi / 180.0);
  Environment out = env;
  for (auto& v : out.vertices) v.x += v.y * shear;
  return out;
}

/// Polygon offset inward by `margin` along each wall normal: the region the
/// aircraft center may physically occupy.
inline Environment viable_region(const Environment& env, double margin) {
  if (!(margin >= 0.0)) throw ConfigError("viable_region: margin must be non-negative");
  if (margin == 0.0) return env;

  std::array<Vec2, 4> anchors;  // one point on each inward-shifted wall line
  std::array<Vec2, 4> dirs;
  for (int i = 0; i < 4; ++i) {
    const Wall w = env.wall(i);
    const Vec2 e = w.b - w.a;
    const double len = e.norm();
    const Vec2 inward{-e.y / len, e.x / len};  // left normal of a CCW edge
    anchors[i] = w.a + inward * margin;
    dirs[i] = e;
  }

  Environment out = env;
  for (int i = 0; i < 4; ++i) {
    // New vertex i+1 is the intersection of shifted walls i and i+1.
    const int j = (i + 1) % 4;
    const double denom = dirs[i].cross(dirs[j]);
    if (std::abs(denom) < 1e-15) throw EmptyRegion("viable_region: adjacent walls are parallel");
    const double s = (anchors[j] - anchors[i]).cross(dirs[j]) / denom;
    out.vertices[j] = anchors[i] + dirs[i] * s;
  }

  // Overshooting margins can re-form a spurious polygon from crossed wall
  // lines; require every vertex to satisfy all four half-plane constraints.
  for (const Vec2& v : out.vertices)
    for (int i = 0; i < 4; ++i)
      if (dirs[i].cross(v - anchors[i]) < -1e-9)
        throw EmptyRegion("viable_region: margin annihilates the polygon");
  for (int i = 0; i < 4; ++i) {
    const Vec2 e1 = out.vertices[(i + 1) % 4] - out.vertices[i];
    const Vec2 e2 = out.vertices[(i + 2) % 4] - out.vertices[(i + 1) % 4];
    if (!(e1.cross(e2) > 0.0)) throw EmptyRegion("viable_region: margin annihilates the polygon");
  }
  return out;
}

}  // namespace mavloc
