#pragma once

/**
 * @file
 * @brief Stuck-plan detection and desired-speed reassignment.
 *
 * A vehicle is deadlocked when the tail of its plan sits at a constant,
 * non-zero distance from where it should be. The fix changes desired speeds
 * so that symmetric vehicles stop producing mirror-image plans.
 */

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "core_types.hpp"
#include "geometry.hpp"

namespace cfsdmpc {

struct DeadlockStatus
{
  bool is_deadlocked{false};
  double tail_mean_distance{0.0};
  double tail_spread{0.0};
};

/// Perpendicular distance to the reference polyline.
struct PathDistance
{};

/// Euclidean distance to a fixed point (e.g. where the outgoing lane starts).
struct ExitPointDistance
{
  Position2 point;
};

using DistanceMode = std::variant<PathDistance, ExitPointDistance>;

/// Evaluate the stuck criterion on a list of tail distances.
inline DeadlockStatus evaluate_tail(std::span<const double> distances, const DeadlockConfig & cfg)
{
  DeadlockStatus st;
  if (distances.empty()) { return st; }
  const auto [lo, hi]   = std::minmax_element(distances.begin(), distances.end());
  st.tail_spread        = std::abs(*hi - *lo);
  st.tail_mean_distance = std::accumulate(distances.begin(), distances.end(), 0.0) / static_cast<double>(distances.size());
  st.is_deadlocked      = st.tail_spread <= cfg.spread_eps && std::abs(st.tail_mean_distance) >= cfg.distance_eps;
  return st;
}

inline std::vector<double> tail_distances(const Trajectory & plan, const ReferencePath & path, std::size_t tail,
                                          const DistanceMode & mode)
{
  if (tail > plan.size()) { throw std::invalid_argument("deadlock: tail longer than plan"); }
  std::vector<double> d;
  d.reserve(tail);
  for (std::size_t k = plan.size() - tail; k < plan.size(); ++k) {
    if (const auto * exit = std::get_if<ExitPointDistance>(&mode)) {
      d.push_back((plan[k] - exit->point).norm());
    } else {
      d.push_back(distance_to_polyline(plan[k], path.polyline));
    }
  }
  return d;
}

inline DeadlockStatus detect(const Trajectory & plan, const ReferencePath & path, const DeadlockConfig & cfg,
                             const DistanceMode & mode = PathDistance{})
{
  const auto d = tail_distances(plan, path, cfg.tail, mode);
  return evaluate_tail(d, cfg);
}

enum class Side { Left, OnPath, Right };

inline const char * to_string(Side s)
{
  switch (s) {
  case Side::Left: return "left";
  case Side::OnPath: return "on_path";
  case Side::Right: return "right";
  }
  return "unknown";
}

/// Which side of the local path direction `p` lies on.
inline Side side_of(const Position2 & p, const Position2 & on_path, const Eigen::Vector2d & direction,
                    double tol = 1e-3)
{
  const double c = cross(direction, p - on_path);
  if (c > tol) { return Side::Left; }
  if (c < -tol) { return Side::Right; }
  return Side::OnPath;
}

struct DeadlockCandidate
{
  std::size_t vehicle_id{0};
  VehicleState state;
  double tail_mean_distance{0.0};
  Side side{Side::OnPath};
  /// Progress toward the goal; filled from `travel_direction` when empty.
  std::optional<double> progress;
};

/**
 * @brief Order deadlocked vehicles, highest priority first.
 *
 * Keys: progress (front first), tail mean distance (smaller first), side
 * (left first), id.
 */
inline std::vector<std::size_t> assign_priorities(std::span<const DeadlockCandidate> candidates,
                                                  const Eigen::Vector2d & travel_direction = Eigen::Vector2d::UnitX())
{
  struct Key
  {
    double progress;
    double mean;
    int side;
    std::size_t id;
  };
  std::vector<Key> keys;
  keys.reserve(candidates.size());
  for (const auto & c : candidates) {
    keys.push_back({c.progress.value_or(travel_direction.dot(c.state.position)), c.tail_mean_distance,
                    static_cast<int>(c.side), c.vehicle_id});
  }
  std::sort(keys.begin(), keys.end(), [](const Key & a, const Key & b) {
    if (a.progress != b.progress) { return a.progress > b.progress; }
    if (a.mean != b.mean) { return a.mean < b.mean; }
    if (a.side != b.side) { return a.side < b.side; }
    return a.id < b.id;
  });
  std::vector<std::size_t> ids;
  ids.reserve(keys.size());
  for (const auto & k : keys) { ids.push_back(k.id); }
  return ids;
}

struct SpeedAssignment
{
  std::map<std::size_t, double> speeds;
  std::map<std::size_t, double> original;

  double speed_of(std::size_t id) const
  {
    if (auto it = speeds.find(id); it != speeds.end()) { return it->second; }
    return original.at(id);
  }

  bool is_modified(std::size_t id) const
  {
    auto it = speeds.find(id);
    return it != speeds.end() && it->second != original.at(id);
  }

  bool operator==(const SpeedAssignment &) const = default;
};

inline const std::vector<double> kDefaultSpeedLadder{2.5, 2.0, 1.5, 1.0};

/**
 * @brief Scale desired speeds by priority rank.
 *
 * Vehicles in `on_target_lane` keep their base speed and do not consume a
 * ladder rung; the rest get base * ladder[rank].
 */
inline SpeedAssignment resolve(std::span<const std::size_t> priorities, const std::map<std::size_t, double> & base_speeds,
                               std::span<const double> ladder, const std::set<std::size_t> & on_target_lane = {})
{
  SpeedAssignment out;
  out.original = base_speeds;
  out.speeds   = base_speeds;
  std::size_t rank = 0;
  for (const auto id : priorities) {
    if (on_target_lane.contains(id)) { continue; }
    if (rank >= ladder.size()) {
      throw std::runtime_error("deadlock resolution: speed ladder has " + std::to_string(ladder.size()) +
                               " rungs but more vehicles need one; scenario is under-configured");
    }
    out.speeds[id] = base_speeds.at(id) * ladder[rank];
    ++rank;
  }
  return out;
}

/// Largest distance from a plan point to the (extended) reference polyline.
inline double max_deviation(const Trajectory & plan, std::span<const Position2> reference)
{
  double worst = 0.0;
  for (const auto & p : plan.points) { worst = std::max(worst, distance_to_polyline(p, reference)); }
  return worst;
}

/// Restore the original speed of `id` once its plan is within `tol` of the reference.
inline SpeedAssignment maybe_revert(SpeedAssignment assignment, std::size_t id, const Trajectory & plan,
                                    std::span<const Position2> reference, double tol = 0.1)
{
  if (assignment.is_modified(id) && max_deviation(plan, reference) <= tol) {
    assignment.speeds[id] = assignment.original.at(id);
  }
  return assignment;
}

inline SpeedAssignment maybe_revert(SpeedAssignment assignment, std::size_t id, const Trajectory & plan,
                                    const Trajectory & reference, double tol = 0.1)
{
  return maybe_revert(std::move(assignment), id, plan, std::span<const Position2>(reference.points), tol);
}

/**
 * @brief True when every plan ends within `tol` of its reference end and all
 *        plans keep at least `d_min` between same-index samples.
 */
inline bool check_consensus(std::span<const Trajectory> plans, std::span<const Trajectory> references, double d_min,
                            double tol)
{
  if (plans.size() != references.size()) { throw std::invalid_argument("check_consensus: list lengths differ"); }
  for (std::size_t i = 0; i < plans.size(); ++i) {
    if (plans[i].size() == 0 || plans[i].size() != references[i].size()) {
      throw std::invalid_argument("check_consensus: trajectory lengths differ");
    }
    if ((plans[i].points.back() - references[i].points.back()).norm() > tol) { return false; }
  }
  for (std::size_t i = 0; i < plans.size(); ++i) {
    for (std::size_t j = i + 1; j < plans.size(); ++j) {
      const std::size_t H = std::min(plans[i].size(), plans[j].size());
      for (std::size_t h = 0; h < H; ++h) {
        if ((plans[i][h] - plans[j][h]).norm() < d_min) { return false; }
      }
    }
  }
  return true;
}

}  // namespace cfsdmpc
