#pragma once

/**
 * @file
 * @brief Run artifacts: trajectory CSV, metrics JSON and an SVG plot.
 */

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "harness.hpp"
#include "serialization.hpp"

namespace cfsdmpc {

namespace detail {

inline std::string fmt9(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path & p)
{
  std::ofstream out(p);
  if (!out) { throw std::runtime_error("cannot write '" + p.string() + "'"); }
  return out;
}

inline json optional_json(const std::optional<double> & v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

/// One row per (round, vehicle); columns as in the header line.
inline void write_trajectory_csv(std::ostream & out, const RunResult & res, std::size_t horizon)
{
  out << "round,vehicle_id,t,x,y,v,theta";
  for (std::size_t h = 1; h <= horizon; ++h) { out << ",plan_x" << h; }
  for (std::size_t h = 1; h <= horizon; ++h) { out << ",plan_y" << h; }
  out << '\n';
  for (const auto & log : res.logs) {
    for (std::size_t i = 0; i < log.vehicles.size(); ++i) {
      const auto & v = log.vehicles[i];
      out << log.round << ',' << i << ',' << detail::fmt9(log.time) << ',' << detail::fmt9(v.state.position.x()) << ','
          << detail::fmt9(v.state.position.y()) << ',' << detail::fmt9(v.state.speed) << ','
          << detail::fmt9(v.state.heading);
      for (std::size_t h = 0; h < horizon; ++h) { out << ',' << detail::fmt9(v.plan[h].x()); }
      for (std::size_t h = 0; h < horizon; ++h) { out << ',' << detail::fmt9(v.plan[h].y()); }
      out << '\n';
    }
  }
}

inline json metrics_to_json(const RunMetrics & m)
{
  json vehicles = json::array();
  for (std::size_t i = 0; i < m.vehicles.size(); ++i) {
    const auto & v = m.vehicles[i];
    vehicles.push_back({
      {"vehicle_id", i},
      {"avg_solve_time", v.avg_solve_time},
      {"max_solve_time", v.max_solve_time},
      {"total_cost", v.total_cost},
      {"min_distance", v.min_distance},
      {"trajectory_length", v.trajectory_length},
      {"time_to_goal", detail::optional_json(v.time_to_goal)},
      {"mean_cross_track", v.mean_cross_track},
      {"lane_change_cross_track", detail::optional_json(v.lane_change_cross_track)},
      {"final_path_distance", v.final_path_distance},
      {"final_desired_speed", v.final_desired_speed},
    });
  }
  return json{
    {"rounds", m.rounds},
    {"avg_round_solve_time", m.avg_round_solve_time},
    {"max_round_solve_time", m.max_round_solve_time},
    {"total_cost", m.total_cost},
    {"total_objective", m.total_objective},
    {"consensus_round", m.consensus_round},
    {"first_speed_change_round", m.first_speed_change_round},
    {"replans_to_consensus", m.replans_to_consensus},
    {"min_distance", m.min_distance},
    {"d_min", m.d_min},
    {"collision_free", m.collision_free},
    {"infeasible_solves", m.infeasible_solves},
    {"hold_replans", m.hold_replans},
    {"deadlock_rounds", m.deadlock_rounds},
    {"longest_deadlock_streak", m.longest_deadlock_streak},
    {"wall_time", m.wall_time},
    {"vehicles", vehicles},
  };
}

/// Executed paths as polylines, final plans dashed.
inline void write_svg(std::ostream & out, const RunResult & res, const std::string & title = "")
{
  static const char * colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  const std::size_t N = res.final_states.size();

  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  auto grow = [&](const Position2 & p) {
    x0 = std::min(x0, p.x());
    y0 = std::min(y0, p.y());
    x1 = std::max(x1, p.x());
    y1 = std::max(y1, p.y());
  };
  for (const auto & log : res.logs) {
    for (const auto & v : log.vehicles) { grow(v.state.position); }
  }
  for (const auto & s : res.final_states) { grow(s.position); }
  if (!res.logs.empty()) {
    for (const auto & v : res.logs.back().vehicles) {
      for (const auto & p : v.plan.points) { grow(p); }
    }
  }
  if (!(x1 >= x0)) { x0 = y0 = 0.0, x1 = y1 = 1.0; }
  const double pad = 5.0;
  x0 -= pad, y0 -= pad, x1 += pad, y1 += pad;
  const double scale = 800.0 / std::max(x1 - x0, 1e-9);
  const double w = (x1 - x0) * scale, h = (y1 - y0) * scale;
  auto X = [&](double x) { return detail::fmt9((x - x0) * scale); };
  auto Y = [&](double y) { return detail::fmt9((y1 - y) * scale); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt9(w) << "\" height=\"" << detail::fmt9(h)
      << "\" viewBox=\"0 0 " << detail::fmt9(w) << ' ' << detail::fmt9(h) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) { out << "<text x=\"8\" y=\"16\" font-size=\"14\">" << title << "</text>\n"; }
  for (std::size_t i = 0; i < N; ++i) {
    const char * c = colors[i % std::size(colors)];
    out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (const auto & log : res.logs) {
      const auto & p = log.vehicles[i].state.position;
      out << X(p.x()) << ',' << Y(p.y()) << ' ';
    }
    out << X(res.final_states[i].position.x()) << ',' << Y(res.final_states[i].position.y()) << "\"/>\n";
    if (!res.logs.empty()) {
      const auto & plan = res.logs.back().vehicles[i].plan;
      out << "<path fill=\"none\" stroke=\"" << c << "\" stroke-dasharray=\"6 4\" d=\"";
      for (std::size_t k = 0; k < plan.size(); ++k) { out << (k == 0 ? "M" : " L") << X(plan[k].x()) << ' ' << Y(plan[k].y()); }
      out << "\"/>\n";
    }
    out << "<circle cx=\"" << X(res.final_states[i].position.x()) << "\" cy=\"" << Y(res.final_states[i].position.y())
        << "\" r=\"4\" fill=\"" << c << "\"/>\n";
  }
  out << "</svg>\n";
}

/// Write trajectories.csv, metrics.json and optionally trajectories.svg into `dir`.
inline void export_run(const RunResult & res, const ScenarioSpec & spec, const std::filesystem::path & dir, bool svg)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) { throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message()); }
  {
    auto out = detail::open_out(dir / "trajectories.csv");
    write_trajectory_csv(out, res, spec.horizon);
  }
  {
    auto out = detail::open_out(dir / "metrics.json");
    json j   = metrics_to_json(res.metrics);
    j["scenario"] = spec.name;
    out << j.dump(2) << '\n';
  }
  if (svg) {
    auto out = detail::open_out(dir / "trajectories.svg");
    write_svg(out, res, spec.name);
  }
}

}  // namespace cfsdmpc
