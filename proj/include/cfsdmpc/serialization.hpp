#pragma once

// JSON encoding of the value types. Doubles are written with round-trip
// precision, so decode(encode(v)) == v.

#include <json.hpp>

#include "core_types.hpp"
#include "deadlock.hpp"
#include "planner.hpp"
#include "vehicle.hpp"

namespace cfsdmpc {

using nlohmann::json;

inline json position_to_json(const Position2 & p) { return json::array({p.x(), p.y()}); }

inline Position2 position_from_json(const json & j)
{
  if (!j.is_array() || j.size() != 2) { throw std::invalid_argument("position must be a [x, y] array"); }
  return Position2(j.at(0).get<double>(), j.at(1).get<double>());
}

inline json polyline_to_json(const std::vector<Position2> & pts)
{
  json a = json::array();
  for (const auto & p : pts) { a.push_back(position_to_json(p)); }
  return a;
}

inline std::vector<Position2> polyline_from_json(const json & j)
{
  std::vector<Position2> pts;
  for (const auto & e : j) { pts.push_back(position_from_json(e)); }
  return pts;
}

inline void to_json(json & j, const Trajectory & t)
{
  j = json{{"points", polyline_to_json(t.points)}, {"sample_dt", t.sample_dt}};
}
inline void from_json(const json & j, Trajectory & t)
{
  t.points    = polyline_from_json(j.at("points"));
  t.sample_dt = j.at("sample_dt").get<double>();
}

inline void to_json(json & j, const VehicleState & s)
{
  j = json{{"position", position_to_json(s.position)}, {"speed", s.speed}, {"heading", s.heading}};
}
inline void from_json(const json & j, VehicleState & s)
{
  s = VehicleState(position_from_json(j.at("position")), j.value("speed", 0.0), j.value("heading", 0.0));
}

inline void to_json(json & j, const VehicleGeometry & g)
{
  j = json{{"radius", g.radius}, {"half_length", g.half_length}, {"half_width", g.half_width}};
}
inline void from_json(const json & j, VehicleGeometry & g)
{
  const VehicleGeometry d{};
  g.radius      = j.value("radius", d.radius);
  g.half_length = j.value("half_length", d.half_length);
  g.half_width  = j.value("half_width", d.half_width);
}

inline void to_json(json & j, const PlannerWeights & w)
{
  j = json{{"tracking", w.tracking}, {"acceleration", w.acceleration}, {"slack", w.slack}};
}
inline void from_json(const json & j, PlannerWeights & w)
{
  const PlannerWeights d{};
  w.tracking     = j.value("tracking", d.tracking);
  w.acceleration = j.value("acceleration", d.acceleration);
  w.slack        = j.value("slack", d.slack);
}

inline void to_json(json & j, const ReferencePath & p)
{
  j = json{{"polyline", polyline_to_json(p.polyline)}, {"desired_speed", p.desired_speed}};
}
inline void from_json(const json & j, ReferencePath & p)
{
  p.polyline      = polyline_from_json(j.at("polyline"));
  p.desired_speed = j.at("desired_speed").get<double>();
}

inline void to_json(json & j, const DeadlockConfig & c)
{
  j = json{{"tail", c.tail}, {"spread_eps", c.spread_eps}, {"distance_eps", c.distance_eps}};
}
inline void from_json(const json & j, DeadlockConfig & c)
{
  const DeadlockConfig d{};
  c.tail         = j.value("tail", d.tail);
  c.spread_eps   = j.value("spread_eps", d.spread_eps);
  c.distance_eps = j.value("distance_eps", d.distance_eps);
}

inline void to_json(json & j, const V2VMessage & m)
{
  j = json{{"sender_id", m.sender_id}, {"round", m.round}, {"trajectory", m.trajectory}, {"heading", m.heading}};
}
inline void from_json(const json & j, V2VMessage & m)
{
  m.sender_id  = j.at("sender_id").get<std::size_t>();
  m.round      = j.at("round").get<long>();
  m.trajectory = j.at("trajectory").get<Trajectory>();
  m.heading    = j.at("heading").get<double>();
}

inline void to_json(json & j, const ControllerGains & g)
{
  j = json{{"speed", g.speed}, {"heading", g.heading}, {"cross_track", g.cross_track}};
}
inline void from_json(const json & j, ControllerGains & g)
{
  const ControllerGains d{};
  g.speed       = j.value("speed", d.speed);
  g.heading     = j.value("heading", d.heading);
  g.cross_track = j.value("cross_track", d.cross_track);
}

inline void to_json(json & j, const PlantParams & p)
{
  j = json{{"wheelbase", p.wheelbase},
           {"curvature", p.curvature == CurvatureModel::StepLength ? "step_length" : "wheelbase"}};
}
inline void from_json(const json & j, PlantParams & p)
{
  p.wheelbase        = j.value("wheelbase", 2.8);
  const auto model   = j.value("curvature", std::string("step_length"));
  if (model == "step_length") {
    p.curvature = CurvatureModel::StepLength;
  } else if (model == "wheelbase") {
    p.curvature = CurvatureModel::Wheelbase;
  } else {
    throw std::invalid_argument("plant.curvature must be step_length or wheelbase");
  }
}

inline void to_json(json & j, const LaneLock & l)
{
  j = json{{"axis", l.axis == 0 ? "x" : "y"}, {"value", l.value}};
}
inline void from_json(const json & j, LaneLock & l)
{
  const auto axis = j.at("axis").get<std::string>();
  if (axis != "x" && axis != "y") { throw std::invalid_argument("lane_lock.axis must be x or y"); }
  l.axis  = axis == "x" ? 0 : 1;
  l.value = j.at("value").get<double>();
}

}  // namespace cfsdmpc
