#pragma once

/**
 * @file
 * @brief Synchronous-round multi-vehicle simulation.
 *
 * With UpdateOrder::Parallel every vehicle sees the plans its neighbors
 * broadcast at the end of the previous round and the planning calls may run
 * on several threads. With UpdateOrder::Sequential vehicles plan in turn and
 * each sees the plans already made in the current round.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "deadlock.hpp"
#include "geometry.hpp"
#include "planner.hpp"
#include "scenario.hpp"
#include "vehicle.hpp"

namespace cfsdmpc {

struct VehicleRoundLog
{
  /// State at the start of the round, before planning.
  VehicleState state;
  Trajectory plan;
  Eigen::Vector2d slack{Eigen::Vector2d::Zero()};
  double solve_time{0.0};
  QpStatus qp_status{QpStatus::Optimal};
  double desired_speed{0.0};
  DeadlockStatus deadlock;
  bool speed_modified{false};
  /// Plan cost with the reference constant dropped.
  double cost{0.0};
  /// Plan cost including the constant.
  double objective{0.0};
  /// Distance from the post-step position to this round's plan.
  double cross_track{0.0};
  /// The QP at the previous plan failed and the plan was rebuilt around
  /// holding the current position.
  bool held{false};
};

struct RoundLog
{
  long round{0};
  double time{0.0};
  std::vector<VehicleRoundLog> vehicles;
  double min_pairwise_distance{std::numeric_limits<double>::infinity()};
  bool consensus{false};
  /// Sum of per-vehicle times (distributed) or the joint solve time.
  double solve_time{0.0};
};

struct VehicleMetrics
{
  double avg_solve_time{0.0};
  double max_solve_time{0.0};
  double total_cost{0.0};
  double min_distance{std::numeric_limits<double>::infinity()};
  double trajectory_length{0.0};
  std::optional<double> time_to_goal;
  double mean_cross_track{0.0};
  /// Mean cross-track error before the vehicle first reaches its path.
  std::optional<double> lane_change_cross_track;
  double final_path_distance{0.0};
  double final_desired_speed{0.0};
};

struct RunMetrics
{
  std::vector<VehicleMetrics> vehicles;
  double avg_round_solve_time{0.0};
  double max_round_solve_time{0.0};
  double total_cost{0.0};
  double total_objective{0.0};
  /// First round from which consensus holds to the end; -1 if never.
  long consensus_round{-1};
  long first_speed_change_round{-1};
  /// Rounds from the first speed change to consensus; -1 if undefined.
  long replans_to_consensus{-1};
  double min_distance{std::numeric_limits<double>::infinity()};
  double d_min{0.0};
  bool collision_free{true};
  /// Solves that failed even after the hold retry.
  std::size_t infeasible_solves{0};
  std::size_t hold_replans{0};
  std::size_t deadlock_rounds{0};
  /// Longest run of consecutive rounds with two or more vehicles deadlocked.
  std::size_t longest_deadlock_streak{0};
  std::size_t rounds{0};
  double wall_time{0.0};
};

struct RunOptions
{
  bool deadlock_resolution{true};
  bool centralized{false};
  std::uint64_t seed{0};
  /// Planner threads per round; only used with UpdateOrder::Parallel.
  unsigned threads{1};
  std::optional<std::size_t> rounds;
  /// Planning order inside a round; empty means index order. Sequential
  /// updates sort it by assigned speed first.
  std::vector<std::size_t> order;
  int centralized_max_iters{30};
  double centralized_tol{1e-4};
  /// Called with each distributed QP before it is solved.
  std::function<void(long, std::size_t, const QuadraticProgram &)> on_qp;
};

struct RunResult
{
  std::vector<RoundLog> logs;
  RunMetrics metrics;
  std::vector<VehicleState> final_states;
};

namespace detail {

inline double distance_to_segments(const Position2 & p, const Trajectory & plan)
{
  if (plan.size() == 1) { return (p - plan[0]).norm(); }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < plan.size(); ++k) {
    best = std::min(best, (p - closest_on_segment(p, plan[k], plan[k + 1])).norm());
  }
  return best;
}

inline Trajectory hold(const Position2 & p, std::size_t horizon, double dt)
{
  Trajectory t;
  t.sample_dt = dt;
  t.points.assign(horizon, p);
  return t;
}

inline Trajectory extrapolate(const VehicleState & s, std::size_t horizon, double dt)
{
  Trajectory t;
  t.sample_dt = dt;
  const Eigen::Vector2d dir(std::cos(s.heading), std::sin(s.heading));
  for (std::size_t k = 0; k < horizon; ++k) { t.points.push_back(s.position + static_cast<double>(k) * s.speed * dt * dir); }
  return t;
}

}  // namespace detail

/**
 * @brief Run a scenario to completion.
 *
 * Round structure: speed reversion and deadlock handling from the previous
 * plans, reference rebuild, planning against the previous broadcast, then
 * either a controller + plant step or placement on the next plan sample.
 */
inline RunResult run(const ScenarioSpec & spec, const RunOptions & opts = {})
{
  if (const auto errs = validate_scenario(spec); !errs.empty()) {
    std::string msg = "invalid scenario '" + spec.name + "':";
    for (const auto & e : errs) { msg += "\n  " + e; }
    throw std::invalid_argument(msg);
  }
  const std::size_t N = spec.vehicles.size();
  const std::size_t H = spec.horizon;
  const double Ts     = spec.sample_dt;
  const double Tr     = spec.replan_dt;
  const std::size_t rounds = opts.rounds.value_or(spec.total_rounds);

  std::vector<std::size_t> order = opts.order;
  if (order.empty()) {
    order.resize(N);
    std::iota(order.begin(), order.end(), 0);
  }
  {
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted.size() != N || sorted[i] != i) { throw std::invalid_argument("run: order is not a permutation"); }
    }
  }

  const auto wall0 = std::chrono::steady_clock::now();

  std::vector<VehicleState> states;
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  for (const auto & v : spec.vehicles) {
    VehicleState s = v.initial;
    if (spec.initial_jitter > 0.0) {
      s.position.x() += spec.initial_jitter * jitter(rng);
      s.position.y() += spec.initial_jitter * jitter(rng);
    }
    states.push_back(s);
  }

  std::map<std::size_t, double> base_speeds;
  for (std::size_t i = 0; i < N; ++i) { base_speeds[i] = spec.vehicles[i].path.desired_speed; }
  SpeedAssignment assignment{base_speeds, base_speeds};

  std::vector<Trajectory> plans(N);
  for (std::size_t i = 0; i < N; ++i) {
    plans[i] = spec.initial_plan == InitialPlan::Reference
                 ? build_reference(spec.vehicles[i].path, states[i].position, H, Ts)
                 : detail::extrapolate(states[i], H, Ts);
  }

  std::vector<DistanceMode> modes(N, PathDistance{});
  std::vector<double> exit_arc(N, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < N; ++i) {
    if (spec.deadlock.exit_point_distance) {
      modes[i]    = ExitPointDistance{*spec.vehicles[i].exit_point};
      exit_arc[i] = project_extended(*spec.vehicles[i].exit_point, spec.vehicles[i].path.polyline).arc_length;
    }
  }

  std::vector<ActiveSetQpSolver> solvers(N, ActiveSetQpSolver(QpSolverOptions{}));
  RunResult result;
  result.logs.reserve(rounds);
  RunMetrics & m = result.metrics;
  m.d_min        = spec.d_min;
  m.vehicles.assign(N, {});
  std::vector<bool> reached_path(N, false);
  std::vector<double> lane_change_sum(N, 0.0);
  std::vector<std::size_t> lane_change_count(N, 0);
  std::size_t streak = 0;

  for (std::size_t r = 0; r < rounds; ++r) {
    RoundLog log;
    log.round = static_cast<long>(r);
    log.time  = static_cast<double>(r) * Tr;
    log.vehicles.resize(N);
    if (N >= 2) { log.min_pairwise_distance = min_pairwise_distance(std::span<const VehicleState>(states)); }

    std::vector<Trajectory> snapshot = plans;

    // deadlock handling from the broadcast plans
    const auto speeds_before = assignment.speeds;
    for (std::size_t i = 0; i < N; ++i) {
      if (assignment.is_modified(i)) {
        assignment = maybe_revert(std::move(assignment), i, snapshot[i],
                                  std::span<const Position2>(spec.vehicles[i].path.polyline), spec.deadlock.revert_tol);
      }
    }
    std::vector<std::size_t> deadlocked;
    for (std::size_t i = 0; i < N && r > 0; ++i) {
      const auto & path = spec.vehicles[i].path;
      const auto proj   = project_extended(states[i].position, path.polyline);
      if (proj.arc_length >= exit_arc[i]) { continue; }
      log.vehicles[i].deadlock = detect(snapshot[i], path, spec.deadlock.config, modes[i]);
      if (log.vehicles[i].deadlock.is_deadlocked) { deadlocked.push_back(i); }
    }
    if (deadlocked.size() >= 2) {
      ++m.deadlock_rounds;
      m.longest_deadlock_streak = std::max(m.longest_deadlock_streak, ++streak);
    } else {
      streak = 0;
    }
    if (spec.deadlock.enabled && opts.deadlock_resolution) {
      std::set<std::size_t> group(deadlocked.begin(), deadlocked.end());
      bool fresh = false;
      for (auto i : deadlocked) { fresh = fresh || !assignment.is_modified(i); }
      for (std::size_t i = 0; i < N; ++i) {
        if (assignment.is_modified(i)) { group.insert(i); }
      }
      if (fresh && group.size() >= 2) {
        std::vector<DeadlockCandidate> candidates;
        std::set<std::size_t> on_target;
        for (auto i : group) {
          const auto & path = spec.vehicles[i].path;
          const auto proj   = project_extended(states[i].position, path.polyline);
          DeadlockCandidate c;
          c.vehicle_id = i;
          c.state      = states[i];
          c.tail_mean_distance = evaluate_tail(tail_distances(snapshot[i], path, spec.deadlock.config.tail, modes[i]),
                                               spec.deadlock.config).tail_mean_distance;
          c.side     = side_of(states[i].position, proj.point, proj.tangent);
          c.progress = proj.arc_length;
          candidates.push_back(c);
          if (!spec.deadlock.exit_point_distance &&
              (states[i].position - proj.point).norm() <= spec.deadlock.config.distance_eps) {
            on_target.insert(i);
          }
        }
        const auto priorities = assign_priorities(candidates);
        auto fresh_assignment = resolve(priorities, base_speeds, spec.deadlock.ladder, on_target);
        for (std::size_t i = 0; i < N; ++i) {
          if (!group.contains(i)) { fresh_assignment.speeds[i] = assignment.speeds.at(i); }
        }
        assignment = std::move(fresh_assignment);
      }
    }
    if (assignment.speeds != speeds_before && m.first_speed_change_round < 0) {
      m.first_speed_change_round = static_cast<long>(r);
    }

    // references at the assigned speeds
    std::vector<Trajectory> refs(N);
    for (std::size_t i = 0; i < N; ++i) {
      log.vehicles[i].state          = states[i];
      log.vehicles[i].desired_speed  = assignment.speed_of(i);
      log.vehicles[i].speed_modified = assignment.is_modified(i);
      refs[i] = build_reference(spec.vehicles[i].path, states[i].position, H, Ts, assignment.speed_of(i));
    }

    std::vector<PlanResult> results(N);
    std::vector<char> held(N, 0);
    if (opts.centralized) {
      std::vector<std::optional<LaneLock>> locks;
      for (const auto & v : spec.vehicles) { locks.push_back(v.lane_lock); }
      auto cres = plan_centralized(states, snapshot, refs, spec.weights, spec.d_min, opts.centralized_max_iters,
                                   opts.centralized_tol, locks);
      results        = std::move(cres.plans);
      log.solve_time = cres.solve_time;
    } else {
      auto neighbors_of = [&](std::size_t i) {
        std::vector<NeighborPlan> neighbors;
        for (std::size_t j = 0; j < N; ++j) {
          if (j == i) { continue; }
          neighbors.push_back({snapshot[j], states[j].heading, spec.vehicles[j].geometry.half_length,
                               spec.vehicles[j].geometry.half_width});
        }
        return neighbors;
      };
      auto plan_one = [&](std::size_t i) {
        PlanOptions po;
        po.lane_lock = spec.vehicles[i].lane_lock;
        const auto neighbors = neighbors_of(i);
        results[i] = plan_step(states[i], snapshot[i], neighbors, spec.vehicles[i].geometry, refs[i], spec.weights, po,
                               &solvers[i]);
        held[i] = 0;
        if (results[i].qp_status != QpStatus::Optimal) {
          auto retry = plan_step(states[i], detail::hold(states[i].position, H, Ts), neighbors,
                                 spec.vehicles[i].geometry, refs[i], spec.weights, po, &solvers[i]);
          if (retry.qp_status == QpStatus::Optimal) {
            retry.solve_time += results[i].solve_time;
            results[i] = std::move(retry);
            held[i]    = 1;
          }
        }
      };
      if (opts.on_qp) {
        for (auto i : order) {
          PlanOptions po;
          po.lane_lock   = spec.vehicles[i].lane_lock;
          const auto dqp = assemble_distributed_qp(states[i].position, snapshot[i], neighbors_of(i),
                                                   spec.vehicles[i].geometry.radius, refs[i], spec.weights, po);
          opts.on_qp(static_cast<long>(r), i, dqp.qp);
        }
      }
      const unsigned T = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(N)));
      if (spec.update == UpdateOrder::Sequential) {
        // faster assigned speed plans first; `order` breaks ties
        auto turn = order;
        std::stable_sort(turn.begin(), turn.end(),
                         [&](std::size_t a, std::size_t b) { return assignment.speed_of(a) > assignment.speed_of(b); });
        for (auto i : turn) {
          plan_one(i);
          snapshot[i] = results[i].trajectory;
        }
      } else if (T == 1) {
        for (auto i : order) { plan_one(i); }
      } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < T; ++t) {
          pool.emplace_back([&, t] {
            for (std::size_t k = t; k < order.size(); k += T) { plan_one(order[k]); }
          });
        }
        for (auto & th : pool) { th.join(); }
      }
      for (const auto & res : results) { log.solve_time += res.solve_time; }
    }

    for (std::size_t i = 0; i < N; ++i) {
      auto & vl      = log.vehicles[i];
      vl.plan        = results[i].trajectory;
      vl.slack       = results[i].slack;
      vl.solve_time  = opts.centralized ? log.solve_time : results[i].solve_time;
      vl.qp_status   = results[i].qp_status;
      vl.objective   = results[i].objective;
      vl.held        = held[i] != 0;
      if (vl.held) { ++m.hold_replans; }
      const Trajectory one[]     = {vl.plan};
      const Eigen::Vector2d sl[] = {vl.slack};
      const Trajectory rf[]      = {refs[i]};
      vl.cost = total_cost(one, sl, rf, spec.weights);
      if (vl.qp_status != QpStatus::Optimal) { ++m.infeasible_solves; }
      plans[i] = vl.plan;
    }
    if (N >= 1) { log.consensus = check_consensus(plans, refs, spec.d_min, spec.consensus_tol); }

    // advance the vehicles
    for (std::size_t i = 0; i < N; ++i) {
      const VehicleState before = states[i];
      if (spec.control == ControlMode::DirectPlacement) {
        const Position2 next      = plans[i].size() >= 2 ? plans[i][1] : plans[i][0];
        const Eigen::Vector2d mv  = next - before.position;
        const double heading      = mv.norm() > 1e-9 ? std::atan2(mv.y(), mv.x()) : before.heading;
        states[i]                 = VehicleState(next, mv.norm() / Ts, heading);
      } else {
        const auto u = tracking_control(before, plans[i], assignment.speed_of(i), spec.gains);
        states[i]    = kinematic_step(before, u, spec.plant, Tr);
      }
      auto & vm = m.vehicles[i];
      vm.trajectory_length += (states[i].position - before.position).norm();
      log.vehicles[i].cross_track = detail::distance_to_segments(states[i].position, plans[i]);
      const auto & line = spec.vehicles[i].path.polyline;
      if (!vm.time_to_goal && (states[i].position - line.back()).norm() <= 0.5) {
        vm.time_to_goal = static_cast<double>(r + 1) * Tr;
      }
      if (!reached_path[i]) {
        if (distance_to_polyline(before.position, line) <= 0.1) {
          reached_path[i] = true;
        } else {
          lane_change_sum[i] += log.vehicles[i].cross_track;
          ++lane_change_count[i];
          if (distance_to_polyline(states[i].position, line) <= 0.1) { reached_path[i] = true; }
        }
      }
    }
    result.logs.push_back(std::move(log));
  }
  result.final_states = states;

  // metrics
  m.rounds = rounds;
  double final_min = std::numeric_limits<double>::infinity();
  if (N >= 2) { final_min = min_pairwise_distance(std::span<const VehicleState>(states)); }
  m.min_distance = final_min;
  for (const auto & log : result.logs) {
    m.min_distance = std::min(m.min_distance, log.min_pairwise_distance);
    m.avg_round_solve_time += log.solve_time;
    m.max_round_solve_time = std::max(m.max_round_solve_time, log.solve_time);
    for (std::size_t i = 0; i < N; ++i) {
      const auto & vl = log.vehicles[i];
      auto & vm       = m.vehicles[i];
      vm.avg_solve_time += vl.solve_time;
      vm.max_solve_time = std::max(vm.max_solve_time, vl.solve_time);
      vm.total_cost += vl.cost;
      vm.mean_cross_track += vl.cross_track;
      m.total_cost += vl.cost;
      m.total_objective += vl.objective;
      for (std::size_t j = 0; j < N; ++j) {
        if (j != i) { vm.min_distance = std::min(vm.min_distance, (vl.state.position - log.vehicles[j].state.position).norm()); }
      }
    }
  }
  for (std::size_t i = 0; i < N; ++i) {
    auto & vm = m.vehicles[i];
    for (std::size_t j = 0; j < N; ++j) {
      if (j != i) { vm.min_distance = std::min(vm.min_distance, (states[i].position - states[j].position).norm()); }
    }
    if (rounds > 0) {
      vm.avg_solve_time /= static_cast<double>(rounds);
      vm.mean_cross_track /= static_cast<double>(rounds);
    }
    if (lane_change_count[i] > 0) {
      vm.lane_change_cross_track = lane_change_sum[i] / static_cast<double>(lane_change_count[i]);
    }
    vm.final_path_distance = distance_to_polyline(states[i].position, spec.vehicles[i].path.polyline);
    vm.final_desired_speed = assignment.speed_of(i);
  }
  if (rounds > 0) { m.avg_round_solve_time /= static_cast<double>(rounds); }
  for (long r = static_cast<long>(result.logs.size()) - 1; r >= 0 && result.logs[static_cast<std::size_t>(r)].consensus; --r) {
    m.consensus_round = r;
  }
  if (m.consensus_round >= 0 && m.first_speed_change_round >= 0) {
    m.replans_to_consensus = std::max(0L, m.consensus_round - m.first_speed_change_round);
  }
  m.collision_free = N < 2 || m.min_distance >= spec.d_min - 1e-9;
  m.wall_time      = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return result;
}

struct Comparison
{
  RunResult distributed;
  RunResult centralized;
};

/// Run the scenario twice, once distributed and once with the joint planner.
inline Comparison compare_centralized(const ScenarioSpec & spec, RunOptions opts = {})
{
  Comparison c;
  opts.centralized = false;
  c.distributed    = run(spec, opts);
  opts.centralized = true;
  c.centralized    = run(spec, opts);
  return c;
}

}  // namespace cfsdmpc
