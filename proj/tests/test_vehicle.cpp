#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cfsdmpc/vehicle.hpp"
#include "oracles/bicycle_rk4.hpp"

using namespace cfsdmpc;

namespace {

double kappa_of(const VehicleState & s, const ControlInput & u, const PlantParams & p, double dt)
{
  const double len = step_length(s.speed, u.accel, dt);
  return p.curvature == CurvatureModel::StepLength ? std::tan(u.steer) / len : std::tan(u.steer) / p.wheelbase;
}

}  // namespace

TEST(KinematicStep, StraightLine)
{
  const auto s = kinematic_step(VehicleState(Position2(0, 0), 10.0, 0.0), ControlInput(0.0, 0.0), PlantParams{}, 0.1);
  EXPECT_NEAR(s.position.x(), 1.0, 1e-12);
  EXPECT_NEAR(s.position.y(), 0.0, 1e-12);
  EXPECT_NEAR(s.speed, 10.0, 1e-12);
  EXPECT_NEAR(s.heading, 0.0, 1e-12);
}

TEST(KinematicStep, UnitCurvatureArc)
{
  // 1 m step with tan(pi/4) / 1 m = unit curvature
  const auto s = kinematic_step(VehicleState(Position2(0, 0), 10.0, 0.0), ControlInput(0.0, std::numbers::pi / 4.0),
                                PlantParams{}, 0.1);
  EXPECT_NEAR(s.position.x(), std::sin(1.0), 1e-12);
  EXPECT_NEAR(s.position.y(), 1.0 - std::cos(1.0), 1e-12);
  EXPECT_NEAR(s.heading, 1.0, 1e-12);
}

TEST(KinematicStep, SpeedFloorNoReverse)
{
  const VehicleState s0(Position2(0, 0), 0.2, 0.0);
  const auto s = kinematic_step(s0, ControlInput(-5.0, 0.0), PlantParams{}, 0.1);
  EXPECT_EQ(s.speed, 0.0);
  EXPECT_NEAR(s.position.x(), 0.2 * 0.2 / 10.0, 1e-12);
  EXPECT_GE(s.position.x(), 0.0);
  // already stopped: nothing moves
  const auto again = kinematic_step(s, ControlInput(-5.0, 0.3), PlantParams{}, 0.1);
  EXPECT_EQ(again.position, s.position);
}

TEST(KinematicStep, MatchesRk4Oracle)
{
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> pos(-50.0, 50.0), ang(-std::numbers::pi, std::numbers::pi),
    speed(0.0, 30.0), acc(-kMaxAccel, kMaxAccel), steer(-kMaxSteer, kMaxSteer), dt(0.01, 0.1);
  for (int i = 0; i < 300; ++i) {
    const VehicleState s(Position2(pos(rng), pos(rng)), speed(rng), ang(rng));
    const ControlInput u(acc(rng), steer(rng));
    const PlantParams p{2.8, i % 2 == 0 ? CurvatureModel::StepLength : CurvatureModel::Wheelbase};
    const double h = dt(rng);
    if (step_length(s.speed, u.accel, h) <= 1e-3) { continue; }
    const auto closed = kinematic_step(s, u, p, h);
    const auto ode    = oracle::integrate_bicycle({s.position.x(), s.position.y(), s.heading, s.speed}, u.accel,
                                                  kappa_of(s, u, p, h), h);
    EXPECT_NEAR(closed.position.x(), ode.x, 1e-6);
    EXPECT_NEAR(closed.position.y(), ode.y, 1e-6);
    EXPECT_NEAR(std::cos(closed.heading), std::cos(ode.theta), 1e-6);
    EXPECT_NEAR(std::sin(closed.heading), std::sin(ode.theta), 1e-6);
    EXPECT_NEAR(closed.speed, ode.v, 1e-9);
  }
}

TEST(KinematicStep, ContinuousAcrossStraightSwitch)
{
  // step length 1 m: turn = tan(steer), straddle the 1e-8 switch
  const VehicleState s0(Position2(3, -2), 10.0, 0.7);
  const auto below    = kinematic_step(s0, ControlInput(0.0, std::atan(0.999e-8)), PlantParams{}, 0.1);
  const auto above    = kinematic_step(s0, ControlInput(0.0, std::atan(1.001e-8)), PlantParams{}, 0.1);
  const auto straight = kinematic_step(s0, ControlInput(0.0, 0.0), PlantParams{}, 0.1);
  EXPECT_LT((below.position - above.position).norm(), 1e-6);
  EXPECT_LT((above.position - straight.position).norm(), 1e-6);
  for (double steer : {1e-7, 1e-6, 1e-5}) {
    const auto s = kinematic_step(s0, ControlInput(0.0, steer), PlantParams{}, 0.1);
    // first-order lateral offset of a gentle arc: L^2 kappa / 2
    EXPECT_NEAR((s.position - straight.position).norm(), 0.5 * std::tan(steer), 1e-8);
  }
}

TEST(ControlInput, ClampedToActuatorLimits)
{
  const ControlInput u(100.0, -3.0);
  EXPECT_EQ(u.accel, kMaxAccel);
  EXPECT_EQ(u.steer, -kMaxSteer);
}

TEST(TrackingControl, ZeroErrorsGiveZeroInput)
{
  Trajectory plan;
  plan.sample_dt = 0.1;
  const double th = 0.4;
  const Eigen::Vector2d dir(std::cos(th), std::sin(th));
  for (int k = 0; k < 10; ++k) { plan.points.push_back(Position2(1, 1) + k * 1.0 * dir); }
  const auto u = tracking_control(VehicleState(Position2(1, 1), 10.0, th), plan, 10.0);
  EXPECT_NEAR(u.accel, 0.0, 1e-9);
  EXPECT_NEAR(u.steer, 0.0, 1e-9);
}

TEST(TrackingControl, SaturatesAcceleration)
{
  Trajectory plan;
  plan.sample_dt = 0.1;
  for (int k = 0; k < 5; ++k) { plan.points.emplace_back(10.0 * k, 0.0); }
  const auto u = tracking_control(VehicleState(Position2(0, 0), 0.0, 0.0), plan, 100.0);
  EXPECT_EQ(u.accel, kMaxAccel);
}

TEST(TrackingControl, DegeneratePlanBrakes)
{
  Trajectory plan;
  plan.sample_dt = 0.1;
  plan.points.assign(5, Position2(2, 2));
  const auto u = tracking_control(VehicleState(Position2(0, 0), 5.0, 0.0), plan, 10.0);
  EXPECT_EQ(u.accel, -kMaxAccel);
  EXPECT_EQ(u.steer, 0.0);
  EXPECT_FALSE(tracking_errors(VehicleState{}, plan, 10.0).has_value());
}

TEST(TrackingControl, SteersTowardPlan)
{
  Trajectory plan;
  plan.sample_dt = 0.1;
  for (int k = 0; k < 5; ++k) { plan.points.emplace_back(1.0 * k, 0.0); }
  // right of the segment: positive cross-track, steer left
  const auto e = tracking_errors(VehicleState(Position2(0, -0.5), 10.0, 0.0), plan, 10.0);
  ASSERT_TRUE(e.has_value());
  EXPECT_NEAR(e->cross_track, 0.5, 1e-12);
  EXPECT_GT(tracking_control(VehicleState(Position2(0, -0.5), 10.0, 0.0), plan, 10.0).steer, 0.0);
  EXPECT_LT(tracking_control(VehicleState(Position2(0, 0.5), 10.0, 0.0), plan, 10.0).steer, 0.0);
}

TEST(TrackingControl, ClosedLoopConvergesToLine)
{
  Trajectory plan;
  plan.sample_dt = 0.1;
  VehicleState s(Position2(0, -1.0), 10.0, 0.0);
  for (int r = 0; r < 300; ++r) {
    plan.points.clear();
    for (int k = 0; k < 10; ++k) { plan.points.emplace_back(s.position.x() + 1.0 * k, 0.0); }
    s = kinematic_step(s, tracking_control(s, plan, 10.0), PlantParams{}, 0.02);
  }
  EXPECT_LT(std::abs(s.position.y()), 0.01);
  EXPECT_NEAR(s.speed, 10.0, 0.05);
}
