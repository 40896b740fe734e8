#pragma once

/**
 * @file
 * @brief Point-to-rectangle signed distance and the convex feasible set
 *        (half-space) it induces.
 */

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>

#include "core_types.hpp"

namespace cfsdmpc {

/// Rectangle of size 2*half_length x 2*half_width, long axis along `heading`.
struct OrientedRect
{
  Position2 center{Position2::Zero()};
  double heading{0.0};
  double half_length{1.9};
  double half_width{1.0};
};

/// The set {x : normal . x >= offset}.
struct HalfSpace
{
  Eigen::Vector2d normal{1.0, 0.0};
  double offset{0.0};

  double margin(const Position2 & x) const { return normal.dot(x) - offset; }
  bool contains(const Position2 & x, double tol = 0.0) const { return margin(x) >= -tol; }
};

struct SignedDistance
{
  double distance;
  Eigen::Vector2d gradient;
};

/**
 * @brief Signed distance from `point` to `rect` and a (sub)gradient.
 *
 * Outside the rectangle this is the Euclidean distance to the closest point,
 * with gradient pointing from that point to `point`. Inside (and on the
 * boundary) it is minus the smallest distance to an edge line, with the
 * outward normal of that edge as gradient. Ties go to the edge whose normal
 * is most aligned with `point - center`, then to the first of
 * (+long, -long, +lat, -lat).
 *
 * With `tie_hint`, edges whose depths are within `tie_band` of the deepest
 * are first ranked by alignment with the hint. Any edge gives a valid inner
 * approximation, so a wide band only changes which side is kept.
 */
inline SignedDistance signed_distance(const Position2 & point, const OrientedRect & rect,
                                      const std::optional<Eigen::Vector2d> & tie_hint = std::nullopt,
                                      double tie_band = 1e-9)
{
  const double c = std::cos(rect.heading), s = std::sin(rect.heading);
  const Eigen::Vector2d axis_long(c, s), axis_lat(-s, c);
  const Eigen::Vector2d rel = point - rect.center;
  const double u = axis_long.dot(rel), v = axis_lat.dot(rel);

  const double du = std::abs(u) - rect.half_length;
  const double dv = std::abs(v) - rect.half_width;

  if (du > 0.0 || dv > 0.0) {
    const double eu = std::max(du, 0.0), ev = std::max(dv, 0.0);
    const double d  = std::hypot(eu, ev);
    const double gu = std::copysign(eu, u) / d, gv = std::copysign(ev, v) / d;
    return {d, gu * axis_long + gv * axis_lat};
  }

  // inside or on the boundary: max over edges of (n_e . x - h_e)
  const std::array<Eigen::Vector2d, 4> normals{axis_long, -axis_long, axis_lat, -axis_lat};
  const std::array<double, 4> values{u - rect.half_length, -u - rect.half_length,
                                     v - rect.half_width, -v - rect.half_width};
  std::size_t best = 0;
  for (std::size_t e = 1; e < 4; ++e) {
    if (values[e] > values[best]) {
      best = e;
    } else if (values[e] == values[best] && normals[e].dot(rel) > normals[best].dot(rel)) {
      best = e;
    }
  }
  if (tie_hint) {
    std::size_t pick = best;
    for (std::size_t e = 0; e < 4; ++e) {
      if (e != pick && values[e] >= values[best] - tie_band && normals[e].dot(*tie_hint) > normals[pick].dot(*tie_hint)) {
        pick = e;
      }
    }
    best = pick;
  }
  return {values[best], normals[best]};
}

/**
 * @brief Linearize signed_distance(x, rect) - margin >= 0 around `x_k`.
 *
 * Signed distance to a convex set is convex, so the returned half-space is
 * contained in the original feasible region for any linearization point.
 */
inline HalfSpace cfs_halfspace(const Position2 & x_k, const OrientedRect & rect, double margin,
                               const std::optional<Eigen::Vector2d> & tie_hint = std::nullopt,
                               double tie_band = 1e-9)
{
  const auto [d, g] = signed_distance(x_k, rect, tie_hint, tie_band);
  const double phi  = d - margin;
  return HalfSpace{g, g.dot(x_k) - phi};
}

/// Smallest center-to-center distance over all pairs.
inline double min_pairwise_distance(std::span<const Position2> positions)
{
  if (positions.size() < 2) { throw std::invalid_argument("min_pairwise_distance needs at least 2 positions"); }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (std::size_t j = i + 1; j < positions.size(); ++j) {
      best = std::min(best, (positions[i] - positions[j]).norm());
    }
  }
  return best;
}

inline double min_pairwise_distance(std::span<const VehicleState> states)
{
  std::vector<Position2> p;
  p.reserve(states.size());
  for (const auto & s : states) { p.push_back(s.position); }
  return min_pairwise_distance(std::span<const Position2>(p));
}

/**
 * @brief Rectangle occupied by a neighbor at sample `h` of its broadcast plan.
 *
 * Oriented along the segment h -> h+1 (the last segment for the final
 * sample). Falls back to `fallback_heading` when the segment is shorter than
 * 1e-6 m.
 */
inline OrientedRect neighbor_rect(const Trajectory & plan, std::size_t h, double fallback_heading,
                                  const VehicleGeometry & geom)
{
  OrientedRect rect{plan[h], fallback_heading, geom.half_length, geom.half_width};
  if (plan.size() >= 2) {
    const std::size_t a = (h + 1 < plan.size()) ? h : plan.size() - 2;
    const Eigen::Vector2d seg = plan[a + 1] - plan[a];
    if (seg.norm() >= 1e-6) { rect.heading = std::atan2(seg.y(), seg.x()); }
  }
  return rect;
}

/// Closest point on segment [a, b] to p.
inline Position2 closest_on_segment(const Position2 & p, const Position2 & a, const Position2 & b)
{
  const Eigen::Vector2d ab = b - a;
  const double len2        = ab.squaredNorm();
  if (len2 <= 0.0) { return a; }
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

struct PolylineProjection
{
  Position2 point;
  /// Arc length from the polyline start to `point`.
  double arc_length;
  /// Signed lateral offset, positive when p is left of the local direction.
  double lateral;
  /// Unit direction of the segment holding `point`.
  Eigen::Vector2d tangent;
};

/**
 * @brief Project onto a polyline whose first and last segments extend to
 *        infinity.
 *
 * Extending the end segments keeps lateral distances meaningful for points
 * beside, behind or past the sampled portion of a lane.
 */
inline PolylineProjection project_extended(const Position2 & p, std::span<const Position2> line)
{
  if (line.size() < 2) { throw std::invalid_argument("polyline needs at least 2 points"); }
  PolylineProjection best{line[0], 0.0, 0.0, Eigen::Vector2d::UnitX()};
  double best_dist = std::numeric_limits<double>::infinity();
  double arc       = 0.0;
  const std::size_t last = line.size() - 2;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const Eigen::Vector2d ab = line[i + 1] - line[i];
    const double len         = ab.norm();
    if (len <= 0.0) { continue; }
    const Eigen::Vector2d dir = ab / len;
    double t                  = (p - line[i]).dot(dir);
    const double lo           = (i == 0) ? -std::numeric_limits<double>::infinity() : 0.0;
    const double hi           = (i == last) ? std::numeric_limits<double>::infinity() : len;
    t                         = std::clamp(t, lo, hi);
    const Position2 q         = line[i] + t * dir;
    const double d            = (p - q).norm();
    if (d < best_dist) {
      best_dist = d;
      best      = {q, arc + t, cross(dir, p - q), dir};
    }
    arc += len;
  }
  return best;
}

/// Unsigned distance to the extended polyline.
inline double distance_to_polyline(const Position2 & p, std::span<const Position2> line)
{
  return (p - project_extended(p, line).point).norm();
}

}  // namespace cfsdmpc
