#pragma once

/**
 * @file
 * @brief Bicycle-kinematics plant and a trajectory-tracking controller.
 */

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "core_types.hpp"

namespace cfsdmpc {

inline constexpr double kMaxAccel = 5.0;
inline constexpr double kMaxSteer = std::numbers::pi / 4.0;

/// Acceleration and steering angle, clamped to actuator limits on construction.
struct ControlInput
{
  double accel{0.0};
  double steer{0.0};

  ControlInput() = default;
  ControlInput(double a, double delta)
      : accel(std::clamp(a, -kMaxAccel, kMaxAccel)), steer(std::clamp(delta, -kMaxSteer, kMaxSteer))
  {}
};

enum class CurvatureModel {
  /// kappa = tan(delta) / L_r, with L_r the distance covered in the step.
  StepLength,
  /// kappa = tan(delta) / wheelbase.
  Wheelbase,
};

struct PlantParams
{
  double wheelbase{2.8};
  CurvatureModel curvature{CurvatureModel::StepLength};
};

/// Distance covered in one step, with the speed floored at zero.
inline double step_length(double v0, double accel, double dt)
{
  if (v0 + accel * dt >= 0.0) { return v0 * dt + 0.5 * accel * dt * dt; }
  // stops within the step
  return accel < 0.0 ? v0 * v0 / (-2.0 * accel) : 0.0;
}

/**
 * @brief Closed-form constant-input update over `dt`.
 *
 * The vehicle moves along a circular arc of length L_r; for |kappa L_r| below
 * 1e-8 the straight-line limit is used.
 */
inline VehicleState kinematic_step(const VehicleState & s, const ControlInput & u, const PlantParams & params,
                                   double dt)
{
  const double len = step_length(s.speed, u.accel, dt);
  const double v1  = std::max(0.0, s.speed + u.accel * dt);
  if (len <= 0.0) { return VehicleState(s.position, v1, s.heading); }

  const double kappa = params.curvature == CurvatureModel::StepLength ? std::tan(u.steer) / len
                                                                      : std::tan(u.steer) / params.wheelbase;
  const double turn  = kappa * len;
  const double th0   = s.heading;
  Position2 p        = s.position;
  if (std::abs(turn) < 1e-8) {
    p += len * Eigen::Vector2d(std::cos(th0), std::sin(th0));
  } else {
    p.x() += (std::sin(th0 + turn) - std::sin(th0)) / kappa;
    p.y() += (std::cos(th0) - std::cos(th0 + turn)) / kappa;
  }
  return VehicleState(p, v1, th0 + turn);
}

struct ControllerGains
{
  /// Speed gain [1/s].
  double speed{2.0};
  /// Heading gain [rad/rad].
  double heading{1.5};
  /// Cross-track gain [rad/m].
  double cross_track{0.8};
};

struct TrackingErrors
{
  double speed_target;
  /// Desired minus actual heading, wrapped.
  double heading;
  /// Positive when the vehicle is right of the segment (steer left to fix).
  double cross_track;
};

/// Errors relative to the first plan segment that is longer than 1e-9 m.
inline std::optional<TrackingErrors> tracking_errors(const VehicleState & s, const Trajectory & plan, double desired_speed)
{
  for (std::size_t k = 0; k + 1 < plan.size(); ++k) {
    const Eigen::Vector2d seg = plan[k + 1] - plan[k];
    const double len          = seg.norm();
    if (len <= 1e-9) { continue; }
    const Eigen::Vector2d dir = seg / len;
    TrackingErrors e{};
    e.speed_target = std::min(len / plan.sample_dt, desired_speed);
    e.heading      = normalize_angle(std::atan2(dir.y(), dir.x()) - s.heading);
    e.cross_track  = -cross(dir, s.position - plan[k]);
    return e;
  }
  return std::nullopt;
}

/**
 * @brief Speed and steering command toward the first plan segment.
 *
 * A degenerate plan (all points coincident) gives full braking and zero
 * steering.
 */
inline ControlInput tracking_control(const VehicleState & s, const Trajectory & plan, double desired_speed,
                                     const ControllerGains & gains = {})
{
  const auto e = tracking_errors(s, plan, desired_speed);
  if (!e) { return ControlInput(-kMaxAccel, 0.0); }
  return ControlInput(gains.speed * (e->speed_target - s.speed),
                      gains.heading * e->heading + gains.cross_track * e->cross_track);
}

}  // namespace cfsdmpc
