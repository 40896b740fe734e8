#pragma once

/**
 * @file
 * @brief Shared value types for the distributed CFS planner.
 *
 * All types are plain values. Invariants are checked by `violations()`
 * members, which report rather than throw, so that a whole scenario can be
 * audited in one pass.
 */

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

namespace cfsdmpc {

/// Planar position in meters.
using Position2 = Eigen::Vector2d;

/// Upper bound on plausible speeds, used to catch unit errors.
inline constexpr double kDefaultMaxSpeed = 60.0;

/// Wrap an angle into (-pi, pi].
inline double normalize_angle(double a)
{
  if (!std::isfinite(a)) { return a; }
  a = std::remainder(a, 2.0 * std::numbers::pi);  // [-pi, pi]
  if (a <= -std::numbers::pi) { a += 2.0 * std::numbers::pi; }
  return a;
}

inline bool is_finite(const Position2 & p) { return std::isfinite(p.x()) && std::isfinite(p.y()); }

/// 2D cross product (z component).
inline double cross(const Eigen::Vector2d & a, const Eigen::Vector2d & b)
{
  return a.x() * b.y() - a.y() * b.x();
}

/**
 * @brief Sequence of H planar waypoints sampled every `sample_dt` seconds.
 *
 * Index 0 is the waypoint tied to the vehicle's current position through the
 * slack equality; index k is k sampling intervals later.
 */
struct Trajectory
{
  std::vector<Position2> points;
  double sample_dt{0.1};

  std::size_t size() const { return points.size(); }
  const Position2 & operator[](std::size_t i) const { return points[i]; }
  Position2 & operator[](std::size_t i) { return points[i]; }

  /// Flatten to [x1, y1, x2, y2, ...].
  Eigen::VectorXd stacked() const
  {
    Eigen::VectorXd v(2 * points.size());
    for (std::size_t i = 0; i < points.size(); ++i) { v.segment<2>(2 * i) = points[i]; }
    return v;
  }

  static Trajectory from_stacked(const Eigen::Ref<const Eigen::VectorXd> & v, double dt)
  {
    Trajectory t;
    t.sample_dt = dt;
    t.points.resize(static_cast<std::size_t>(v.size() / 2));
    for (std::size_t i = 0; i < t.points.size(); ++i) { t.points[i] = v.segment<2>(2 * i); }
    return t;
  }

  std::vector<std::string> violations(std::size_t horizon, double max_speed = kDefaultMaxSpeed) const
  {
    std::vector<std::string> out;
    if (points.size() != horizon) {
      out.push_back("trajectory length " + std::to_string(points.size()) + " != horizon " +
                    std::to_string(horizon));
    }
    if (!(sample_dt > 0.0)) { out.push_back("trajectory sample_dt must be positive"); }
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!is_finite(points[i])) {
        out.push_back("trajectory point " + std::to_string(i) + " not finite");
        return out;
      }
    }
    if (sample_dt > 0.0) {
      for (std::size_t i = 1; i < points.size(); ++i) {
        if ((points[i] - points[i - 1]).norm() > max_speed * sample_dt + 1e-9) {
          out.push_back("trajectory step " + std::to_string(i) + " exceeds max speed");
          break;
        }
      }
    }
    return out;
  }

  bool operator==(const Trajectory &) const = default;
};

struct VehicleState
{
  Position2 position{Position2::Zero()};
  double speed{0.0};
  /// Radians in (-pi, pi].
  double heading{0.0};

  VehicleState() = default;
  VehicleState(Position2 p, double v, double theta)
      : position(std::move(p)), speed(v), heading(normalize_angle(theta))
  {}

  std::vector<std::string> violations() const
  {
    std::vector<std::string> out;
    if (!is_finite(position)) { out.push_back("state position not finite"); }
    if (!(speed >= 0.0) || !std::isfinite(speed)) { out.push_back("state speed must be >= 0"); }
    if (!std::isfinite(heading)) { out.push_back("state heading not finite"); }
    return out;
  }

  bool operator==(const VehicleState &) const = default;
};

/// Ego vehicle is a circle of radius `radius`; others are seen as rectangles.
struct VehicleGeometry
{
  double radius{3.0};
  double half_length{1.9};
  double half_width{1.0};

  std::vector<std::string> violations() const
  {
    std::vector<std::string> out;
    if (!(radius > 0.0)) { out.push_back("geometry radius must be > 0"); }
    if (!(half_length > 0.0)) { out.push_back("geometry half_length must be > 0"); }
    if (!(half_width > 0.0)) { out.push_back("geometry half_width must be > 0"); }
    return out;
  }

  bool operator==(const VehicleGeometry &) const = default;
};

/// Weights of the tracking, acceleration and slack cost terms.
struct PlannerWeights
{
  double tracking{1.0};
  double acceleration{1.0};
  double slack{1000.0};

  std::vector<std::string> violations() const
  {
    std::vector<std::string> out;
    if (!(tracking > 0.0)) { out.push_back("weight tracking must be > 0"); }
    if (!(acceleration > 0.0)) { out.push_back("weight acceleration must be > 0"); }
    if (!(slack > 0.0)) { out.push_back("weight slack must be > 0"); }
    return out;
  }

  bool operator==(const PlannerWeights &) const = default;
};

/// Piecewise-linear lane centerline plus the speed to travel it at.
struct ReferencePath
{
  std::vector<Position2> polyline;
  double desired_speed{10.0};

  std::vector<std::string> violations() const
  {
    std::vector<std::string> out;
    if (polyline.size() < 2) { out.push_back("reference path needs at least 2 points"); }
    for (std::size_t i = 1; i < polyline.size(); ++i) {
      if ((polyline[i] - polyline[i - 1]).norm() <= 0.0) {
        out.push_back("reference path has repeated point at " + std::to_string(i));
        break;
      }
    }
    for (const auto & p : polyline) {
      if (!is_finite(p)) {
        out.push_back("reference path point not finite");
        break;
      }
    }
    if (!(desired_speed > 0.0)) { out.push_back("reference path desired_speed must be > 0"); }
    return out;
  }

  bool operator==(const ReferencePath &) const = default;
};

/// Thresholds of the stuck-plan criterion over the last `tail` plan points.
struct DeadlockConfig
{
  std::size_t tail{5};
  double spread_eps{0.01};
  double distance_eps{0.2};

  std::vector<std::string> violations(std::size_t horizon) const
  {
    std::vector<std::string> out;
    if (tail < 1 || tail > horizon) { out.push_back("deadlock tail must be in [1, H]"); }
    if (!(spread_eps > 0.0)) { out.push_back("deadlock spread_eps must be > 0"); }
    if (!(distance_eps > 0.0)) { out.push_back("deadlock distance_eps must be > 0"); }
    return out;
  }

  bool operator==(const DeadlockConfig &) const = default;
};

/// Broadcast plan of one vehicle.
struct V2VMessage
{
  std::size_t sender_id{0};
  long round{0};
  Trajectory trajectory;
  double heading{0.0};

  bool operator==(const V2VMessage &) const = default;
};

}  // namespace cfsdmpc
