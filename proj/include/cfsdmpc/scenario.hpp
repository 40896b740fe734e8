#pragma once

/**
 * @file
 * @brief Scenario description, validation, built-in road scenarios and the
 *        JSON scenario file format.
 */

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "core_types.hpp"
#include "deadlock.hpp"
#include "planner.hpp"
#include "serialization.hpp"
#include "vehicle.hpp"

namespace cfsdmpc {

enum class RoadKind { Highway, Intersection, Unstructured };
enum class ControlMode {
  /// The vehicle lands exactly on the next plan sample; needs T_r == T_s.
  DirectPlacement,
  /// Tracking controller plus bicycle plant, stepped every T_r.
  TrackedControl,
};
enum class InitialPlan {
  /// Straight-line extrapolation of the initial state at its speed.
  Extrapolate,
  /// The reference built from the initial state.
  Reference,
};

enum class UpdateOrder {
  /// Vehicles plan one after another and see plans made earlier in the round.
  Sequential,
  /// Every vehicle plans against the previous round's broadcast.
  Parallel,
};

inline constexpr double kLaneWidth = 4.0;
/// Acceleration weight used by the built-in scenarios.
inline constexpr double kScenarioAccelerationWeight = 0.02;

struct VehicleSpec
{
  VehicleState initial;
  ReferencePath path;
  VehicleGeometry geometry;
  std::optional<LaneLock> lane_lock;
  /// Target for the exit-point deadlock distance, when that mode is used.
  std::optional<Position2> exit_point;
};

struct DeadlockSettings
{
  DeadlockConfig config;
  std::vector<double> ladder{kDefaultSpeedLadder};
  /// Use each vehicle's exit_point instead of the path distance.
  bool exit_point_distance{false};
  bool enabled{true};
  /// Plan deviation below which an assigned speed is reverted.
  double revert_tol{0.1};
};

struct ScenarioSpec
{
  std::string name{"custom"};
  RoadKind road{RoadKind::Highway};
  std::vector<VehicleSpec> vehicles;
  PlannerWeights weights;
  std::size_t horizon{20};
  double sample_dt{0.1};
  double replan_dt{0.02};
  DeadlockSettings deadlock;
  std::size_t total_rounds{100};
  ControlMode control{ControlMode::TrackedControl};
  InitialPlan initial_plan{InitialPlan::Extrapolate};
  UpdateOrder update{UpdateOrder::Sequential};
  /// Audit margin for center-to-center distances.
  double d_min{3.0};
  /// Terminal-point tolerance of the consensus check.
  double consensus_tol{1.0};
  ControllerGains gains;
  PlantParams plant;
  /// Uniform perturbation of the initial positions, seeded per run.
  double initial_jitter{0.0};
  double max_speed{kDefaultMaxSpeed};
};

/// Every invariant violation in `spec`; empty when the scenario can run.
inline std::vector<std::string> validate_scenario(const ScenarioSpec & spec)
{
  std::vector<std::string> out;
  auto add = [&](const std::string & prefix, const std::vector<std::string> & v) {
    for (const auto & s : v) { out.push_back(prefix + s); }
  };
  if (spec.vehicles.empty()) { out.push_back("scenario has no vehicles"); }
  if (spec.horizon < 2) { out.push_back("horizon too short (H must be >= 2)"); }
  if (!(spec.sample_dt > 0.0)) { out.push_back("sample_dt must be > 0"); }
  if (!(spec.replan_dt > 0.0)) { out.push_back("replan_dt must be > 0"); }
  if (spec.control == ControlMode::DirectPlacement && std::abs(spec.replan_dt - spec.sample_dt) > 1e-12) {
    out.push_back("direct placement requires replan_dt == sample_dt");
  }
  if (spec.control == ControlMode::TrackedControl && spec.replan_dt > spec.sample_dt + 1e-12) {
    out.push_back("tracked control requires replan_dt <= sample_dt");
  }
  if (!(spec.d_min > 0.0)) { out.push_back("d_min must be > 0"); }
  if (!(spec.consensus_tol > 0.0)) { out.push_back("consensus_tol must be > 0"); }
  if (spec.initial_jitter < 0.0) { out.push_back("initial_jitter must be >= 0"); }
  add("weights: ", spec.weights.violations());
  if (spec.horizon >= 2) { add("deadlock: ", spec.deadlock.config.violations(spec.horizon)); }
  for (double m : spec.deadlock.ladder) {
    if (!(m > 0.0)) {
      out.push_back("deadlock: ladder multipliers must be > 0");
      break;
    }
  }
  for (std::size_t i = 0; i < spec.vehicles.size(); ++i) {
    const auto & v      = spec.vehicles[i];
    const auto prefix   = "vehicle " + std::to_string(i) + ": ";
    add(prefix, v.initial.violations());
    add(prefix, v.path.violations());
    add(prefix, v.geometry.violations());
    if (v.initial.speed > spec.max_speed || v.path.desired_speed > spec.max_speed) {
      out.push_back(prefix + "speed exceeds max_speed");
    }
    if (v.lane_lock && v.lane_lock->axis != 0 && v.lane_lock->axis != 1) { out.push_back(prefix + "bad lane_lock axis"); }
    if (spec.deadlock.exit_point_distance && !v.exit_point) { out.push_back(prefix + "missing exit_point"); }
  }
  for (std::size_t i = 0; i < spec.vehicles.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.vehicles.size(); ++j) {
      const double d = (spec.vehicles[i].initial.position - spec.vehicles[j].initial.position).norm();
      if (d < spec.d_min) {
        out.push_back("initial collision between vehicles " + std::to_string(i) + " and " + std::to_string(j));
      }
    }
  }
  return out;
}

namespace detail {

/// Straight lane along +x at height y.
inline ReferencePath highway_lane(double y, double speed, double x_begin = -100.0, double x_end = 5000.0)
{
  return ReferencePath{{Position2(x_begin, y), Position2(x_end, y)}, speed};
}

inline VehicleSpec highway_vehicle(Position2 start, double speed, double target_lane_y)
{
  VehicleSpec v;
  v.initial = VehicleState(start, speed, 0.0);
  v.path    = highway_lane(target_lane_y, speed);
  return v;
}

}  // namespace detail

inline const std::vector<std::string> & builtin_scenario_names()
{
  static const std::vector<std::string> names{"unstructured_road", "intersection", "crossing",
                                              "platoon",           "merging",      "overtaking"};
  return names;
}

/**
 * @brief Formation of `count` vehicles alternating between the outer lanes,
 *        6 m apart, merging into the middle lane at 20 m/s.
 *
 * `count` = 4 is the platoon scenario.
 */
inline ScenarioSpec formation_scenario(std::size_t count, ControlMode control = ControlMode::TrackedControl)
{
  ScenarioSpec s;
  s.name    = "formation_" + std::to_string(count);
  s.weights.acceleration = kScenarioAccelerationWeight;
  s.road    = RoadKind::Highway;
  s.horizon = 20;
  s.sample_dt = 0.1;
  s.control = control;
  if (control == ControlMode::TrackedControl) {
    s.replan_dt    = 0.02;
    s.total_rounds = 100;
  } else {
    s.replan_dt    = 0.1;
    s.total_rounds = 30;
  }
  for (std::size_t i = 0; i < count; ++i) {
    const double y = (i % 2 == 0) ? -kLaneWidth : kLaneWidth;
    s.vehicles.push_back(detail::highway_vehicle(Position2(6.0 * static_cast<double>(i), y), 20.0, 0.0));
  }
  return s;
}

/// One of the six built-in scenarios; throws on an unknown name.
inline ScenarioSpec builtin_scenario(const std::string & name)
{
  ScenarioSpec s;
  s.name                 = name;
  s.weights.acceleration = kScenarioAccelerationWeight;
  if (name == "unstructured_road") {
    s.road      = RoadKind::Unstructured;
    s.horizon   = 10;
    s.sample_dt = 0.1;
    s.replan_dt = 0.1;
    s.control   = ControlMode::DirectPlacement;
    s.total_rounds = 80;
    const double radius = 20.0;
    for (int k = 0; k < 3; ++k) {
      const double a = -std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * k / 3.0;
      const Position2 start(radius * std::cos(a), radius * std::sin(a));
      VehicleSpec v;
      v.initial = VehicleState(start, 10.0, a + std::numbers::pi);
      v.path    = ReferencePath{{start, Position2(-start)}, 10.0};
      s.vehicles.push_back(v);
    }
  } else if (name == "intersection") {
    s.road      = RoadKind::Intersection;
    s.horizon   = 10;
    s.sample_dt = 0.1;
    s.replan_dt = 0.1;
    s.control   = ControlMode::DirectPlacement;
    s.total_rounds = 120;
    s.d_min     = 2.5;
    s.deadlock.config             = DeadlockConfig{2, 0.15, 2.0};
    s.deadlock.exit_point_distance = true;
    // lanes: northbound x = 2, southbound x = -2, eastbound y = 23, westbound y = 27;
    // the lanes cross inside the box [-4, 4] x [21, 29]
    struct Lane
    {
      Position2 start, end, exit;
      double heading;
      LaneLock lock;
    };
    const Lane lanes[] = {
      {{2.0, 0.0}, {2.0, 60.0}, {2.0, 29.0}, std::numbers::pi / 2.0, {0, 2.0}},
      {{-2.0, 50.0}, {-2.0, -10.0}, {-2.0, 21.0}, -std::numbers::pi / 2.0, {0, -2.0}},
      {{-25.0, 23.0}, {35.0, 23.0}, {4.0, 23.0}, 0.0, {1, 23.0}},
      {{25.0, 27.0}, {-35.0, 27.0}, {-4.0, 27.0}, std::numbers::pi, {1, 27.0}},
    };
    for (const auto & lane : lanes) {
      VehicleSpec v;
      v.initial         = VehicleState(lane.start, 10.0, lane.heading);
      v.path            = ReferencePath{{lane.start, lane.end}, 10.0};
      v.geometry.radius = 2.5;
      v.lane_lock       = lane.lock;
      v.exit_point      = lane.exit;
      s.vehicles.push_back(v);
    }
  } else if (name == "crossing") {
    s.horizon   = 20;
    s.sample_dt = 0.1;
    s.replan_dt = 0.02;
    s.total_rounds = 300;
    s.deadlock.config = DeadlockConfig{5, 0.01, 0.2};
    s.deadlock.ladder = {1.5, 1.0};
    s.vehicles.push_back(detail::highway_vehicle({0.0, -kLaneWidth}, 10.0, kLaneWidth));
    s.vehicles.push_back(detail::highway_vehicle({0.0, kLaneWidth}, 10.0, -kLaneWidth));
  } else if (name == "platoon") {
    s = formation_scenario(4);
    s.name         = name;
    s.total_rounds = 150;
  } else if (name == "merging") {
    s.horizon   = 25;
    s.sample_dt = 0.1;
    s.replan_dt = 0.02;
    s.total_rounds = 300;
    s.deadlock.config = DeadlockConfig{5, 0.01, 0.2};
    // start positions are not published; two cars on the target lane and
    // two alongside them one lane over
    s.vehicles.push_back(detail::highway_vehicle({10.0, 0.0}, 10.0, 0.0));
    s.vehicles.push_back(detail::highway_vehicle({0.0, 0.0}, 10.0, 0.0));
    s.vehicles.push_back(detail::highway_vehicle({0.0, kLaneWidth}, 10.0, 0.0));
    s.vehicles.push_back(detail::highway_vehicle({10.0, kLaneWidth}, 10.0, 0.0));
  } else if (name == "overtaking") {
    s.horizon   = 25;
    s.sample_dt = 0.1;
    s.replan_dt = 0.02;
    s.total_rounds = 150;
    s.vehicles.push_back(detail::highway_vehicle({0.0, 0.0}, 50.0, 0.0));
    s.vehicles.push_back(detail::highway_vehicle({15.0, 0.0}, 10.0, 0.0));
    s.vehicles.push_back(detail::highway_vehicle({20.0, -kLaneWidth}, 10.0, -kLaneWidth));
    s.vehicles.push_back(detail::highway_vehicle({25.0, 0.0}, 10.0, 0.0));
  } else {
    std::string valid;
    for (const auto & n : builtin_scenario_names()) { valid += (valid.empty() ? "" : ", ") + n; }
    throw std::invalid_argument("unknown scenario '" + name + "'; valid names: " + valid);
  }
  return s;
}

inline const char * to_string(RoadKind r)
{
  switch (r) {
  case RoadKind::Highway: return "highway";
  case RoadKind::Intersection: return "intersection";
  case RoadKind::Unstructured: return "unstructured";
  }
  return "unknown";
}

inline const char * to_string(ControlMode c)
{
  return c == ControlMode::DirectPlacement ? "direct_placement" : "tracked_control";
}

inline json scenario_to_json(const ScenarioSpec & s)
{
  json vehicles = json::array();
  for (const auto & v : s.vehicles) {
    json jv{{"initial", v.initial}, {"path", v.path}, {"geometry", v.geometry}};
    if (v.lane_lock) { jv["lane_lock"] = *v.lane_lock; }
    if (v.exit_point) { jv["exit_point"] = position_to_json(*v.exit_point); }
    vehicles.push_back(jv);
  }
  return json{
    {"name", s.name},
    {"road", to_string(s.road)},
    {"control", to_string(s.control)},
    {"initial_plan", s.initial_plan == InitialPlan::Extrapolate ? "extrapolate" : "reference"},
    {"update", s.update == UpdateOrder::Sequential ? "sequential" : "parallel"},
    {"timing", {{"horizon", s.horizon}, {"sample_dt", s.sample_dt}, {"replan_dt", s.replan_dt}, {"total_rounds", s.total_rounds}}},
    {"weights", s.weights},
    {"deadlock",
     {{"config", s.deadlock.config},
      {"ladder", s.deadlock.ladder},
      {"exit_point_distance", s.deadlock.exit_point_distance},
      {"enabled", s.deadlock.enabled},
      {"revert_tol", s.deadlock.revert_tol}}},
    {"safety", {{"d_min", s.d_min}, {"consensus_tol", s.consensus_tol}, {"max_speed", s.max_speed}}},
    {"controller", s.gains},
    {"plant", s.plant},
    {"initial_jitter", s.initial_jitter},
    {"vehicles", vehicles},
  };
}

/// Decode a scenario document. Missing optional sections take defaults.
inline ScenarioSpec scenario_from_json(const json & j)
{
  ScenarioSpec s;
  s.name = j.value("name", std::string("custom"));

  const auto road = j.value("road", std::string("highway"));
  if (road == "highway") {
    s.road = RoadKind::Highway;
  } else if (road == "intersection") {
    s.road = RoadKind::Intersection;
  } else if (road == "unstructured") {
    s.road = RoadKind::Unstructured;
  } else {
    throw std::invalid_argument("road must be highway, intersection or unstructured");
  }

  const auto control = j.value("control", std::string("tracked_control"));
  if (control == "tracked_control") {
    s.control = ControlMode::TrackedControl;
  } else if (control == "direct_placement") {
    s.control = ControlMode::DirectPlacement;
  } else {
    throw std::invalid_argument("control must be tracked_control or direct_placement");
  }

  const auto init = j.value("initial_plan", std::string("extrapolate"));
  if (init == "extrapolate") {
    s.initial_plan = InitialPlan::Extrapolate;
  } else if (init == "reference") {
    s.initial_plan = InitialPlan::Reference;
  } else {
    throw std::invalid_argument("initial_plan must be extrapolate or reference");
  }

  const auto update = j.value("update", std::string("sequential"));
  if (update == "sequential") {
    s.update = UpdateOrder::Sequential;
  } else if (update == "parallel") {
    s.update = UpdateOrder::Parallel;
  } else {
    throw std::invalid_argument("update must be sequential or parallel");
  }

  if (j.contains("timing")) {
    const auto & t = j.at("timing");
    s.horizon      = t.value("horizon", s.horizon);
    s.sample_dt    = t.value("sample_dt", s.sample_dt);
    s.replan_dt    = t.value("replan_dt", s.replan_dt);
    s.total_rounds = t.value("total_rounds", s.total_rounds);
  }
  if (j.contains("weights")) { s.weights = j.at("weights").get<PlannerWeights>(); }
  if (j.contains("deadlock")) {
    const auto & d = j.at("deadlock");
    if (d.contains("config")) { s.deadlock.config = d.at("config").get<DeadlockConfig>(); }
    s.deadlock.ladder              = d.value("ladder", s.deadlock.ladder);
    s.deadlock.exit_point_distance = d.value("exit_point_distance", s.deadlock.exit_point_distance);
    s.deadlock.enabled             = d.value("enabled", s.deadlock.enabled);
    s.deadlock.revert_tol          = d.value("revert_tol", s.deadlock.revert_tol);
  }
  if (j.contains("safety")) {
    const auto & sf = j.at("safety");
    s.d_min         = sf.value("d_min", s.d_min);
    s.consensus_tol = sf.value("consensus_tol", s.consensus_tol);
    s.max_speed     = sf.value("max_speed", s.max_speed);
  }
  if (j.contains("controller")) { s.gains = j.at("controller").get<ControllerGains>(); }
  if (j.contains("plant")) { s.plant = j.at("plant").get<PlantParams>(); }
  s.initial_jitter = j.value("initial_jitter", 0.0);

  for (const auto & jv : j.at("vehicles")) {
    VehicleSpec v;
    v.initial = jv.at("initial").get<VehicleState>();
    v.path    = jv.at("path").get<ReferencePath>();
    if (jv.contains("geometry")) { v.geometry = jv.at("geometry").get<VehicleGeometry>(); }
    if (jv.contains("lane_lock")) { v.lane_lock = jv.at("lane_lock").get<LaneLock>(); }
    if (jv.contains("exit_point")) { v.exit_point = position_from_json(jv.at("exit_point")); }
    s.vehicles.push_back(v);
  }
  return s;
}

inline ScenarioSpec load_scenario_file(const std::string & path)
{
  std::ifstream in(path);
  if (!in) { throw std::runtime_error("cannot open scenario file '" + path + "'"); }
  json j;
  try {
    in >> j;
  } catch (const json::parse_error & e) {
    throw std::runtime_error("scenario file '" + path + "': " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace cfsdmpc
