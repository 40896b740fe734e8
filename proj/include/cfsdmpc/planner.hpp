#pragma once

/**
 * @file
 * @brief Trajectory planning by convex feasible set (CFS) iterations.
 *
 * Decision variable per vehicle: z = [x^1; ...; x^H; s] in R^{2H+2}, with
 * points stacked as (x, y) pairs and s the slack on the initial point,
 * x^1 = x_current + s. Cost:
 * \f[
 *   J = \tfrac12 c_o \|x - x^{ref}\|^2 + \tfrac12 c_a \|A x\|^2 + c_s \|s\|^2
 * \f]
 * where A takes second differences divided by T_s^2.
 */

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "core_types.hpp"
#include "geometry.hpp"
#include "qp.hpp"

namespace cfsdmpc {

/// Maps stacked points [x^1; ...; x^H] to interior accelerations. 2(H-2) x 2H.
inline Eigen::MatrixXd acceleration_operator(std::size_t horizon, double sample_dt)
{
  if (!(sample_dt > 0.0)) { throw std::invalid_argument("acceleration_operator: sample_dt must be positive"); }
  const auto H    = static_cast<Eigen::Index>(horizon);
  const auto rows = H >= 3 ? 2 * (H - 2) : 0;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, 2 * H);
  const double inv  = 1.0 / (sample_dt * sample_dt);
  for (Eigen::Index h = 1; h + 1 < H; ++h) {
    for (Eigen::Index c = 0; c < 2; ++c) {
      const Eigen::Index row = 2 * (h - 1) + c;
      A(row, 2 * (h - 1) + c) = inv;
      A(row, 2 * h + c)       = -2.0 * inv;
      A(row, 2 * (h + 1) + c) = inv;
    }
  }
  return A;
}

/**
 * @brief Reference samples ahead of the current position along `path`.
 *
 * Sample k (0-based) sits (k + 1) * speed * sample_dt of arc length past the
 * projection of `current`, clamped to the path's end.
 */
inline Trajectory build_reference(const ReferencePath & path, const Position2 & current, std::size_t horizon,
                                  double sample_dt, double speed)
{
  const auto & line = path.polyline;
  if (line.size() < 2) { throw std::invalid_argument("build_reference: path needs at least 2 points"); }
  std::vector<double> cumulative(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) { cumulative[i] = cumulative[i - 1] + (line[i] - line[i - 1]).norm(); }
  const double total = cumulative.back();

  auto point_at = [&](double s) -> Position2 {
    s = std::clamp(s, 0.0, total);
    auto it       = std::upper_bound(cumulative.begin(), cumulative.end(), s);
    std::size_t i = it == cumulative.end() ? line.size() - 2 : static_cast<std::size_t>(it - cumulative.begin()) - 1;
    i             = std::min(i, line.size() - 2);
    const double seg = cumulative[i + 1] - cumulative[i];
    const double t   = seg > 0.0 ? (s - cumulative[i]) / seg : 0.0;
    return line[i] + t * (line[i + 1] - line[i]);
  };

  const double start = std::clamp(project_extended(current, line).arc_length, 0.0, total);
  Trajectory ref;
  ref.sample_dt = sample_dt;
  ref.points.reserve(horizon);
  for (std::size_t k = 0; k < horizon; ++k) {
    ref.points.push_back(point_at(start + static_cast<double>(k + 1) * speed * sample_dt));
  }
  return ref;
}

inline Trajectory build_reference(const ReferencePath & path, const Position2 & current, std::size_t horizon,
                                  double sample_dt)
{
  return build_reference(path, current, horizon, sample_dt, path.desired_speed);
}

/// Quadratic cost over [x; s], constant term dropped.
struct ObjectiveForm
{
  Eigen::MatrixXd Q;
  Eigen::VectorXd q;
  /// 0.5 c_o ||x_ref||^2, the dropped constant.
  double constant{0.0};
};

inline ObjectiveForm build_objective(const Trajectory & reference, const PlannerWeights & w)
{
  const auto H = static_cast<Eigen::Index>(reference.size());
  const auto n = 2 * H + 2;
  const Eigen::MatrixXd A = acceleration_operator(reference.size(), reference.sample_dt);
  const Eigen::VectorXd xr = reference.stacked();

  ObjectiveForm obj;
  obj.Q = Eigen::MatrixXd::Zero(n, n);
  obj.Q.topLeftCorner(2 * H, 2 * H) = w.tracking * Eigen::MatrixXd::Identity(2 * H, 2 * H);
  if (A.rows() > 0) { obj.Q.topLeftCorner(2 * H, 2 * H) += w.acceleration * A.transpose() * A; }
  obj.Q.bottomRightCorner(2, 2) = 2.0 * w.slack * Eigen::Matrix2d::Identity();
  obj.q = Eigen::VectorXd::Zero(n);
  obj.q.head(2 * H) = -w.tracking * xr;
  obj.constant = 0.5 * w.tracking * xr.squaredNorm();
  return obj;
}

/// Full objective J including the constant term.
inline double plan_objective(const Trajectory & plan, const Eigen::Vector2d & slack, const Trajectory & reference,
                             const PlannerWeights & w)
{
  const Eigen::VectorXd x = plan.stacked();
  const Eigen::MatrixXd A = acceleration_operator(plan.size(), reference.sample_dt);
  double j = 0.5 * w.tracking * (x - reference.stacked()).squaredNorm() + w.slack * slack.squaredNorm();
  if (A.rows() > 0) { j += 0.5 * w.acceleration * (A * x).squaredNorm(); }
  return j;
}

/// Sum over vehicles of J with the 0.5 c_o ||x_ref||^2 constant dropped; may be negative.
inline double total_cost(std::span<const Trajectory> plans, std::span<const Eigen::Vector2d> slacks,
                         std::span<const Trajectory> references, const PlannerWeights & w)
{
  if (plans.size() != slacks.size() || plans.size() != references.size()) {
    throw std::invalid_argument("total_cost: inconsistent list lengths");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const Eigen::VectorXd x  = plans[i].stacked();
    const Eigen::VectorXd xr = references[i].stacked();
    const Eigen::MatrixXd A  = acceleration_operator(plans[i].size(), references[i].sample_dt);
    total += 0.5 * w.tracking * x.squaredNorm() - w.tracking * x.dot(xr) + w.slack * slacks[i].squaredNorm();
    if (A.rows() > 0) { total += 0.5 * w.acceleration * (A * x).squaredNorm(); }
  }
  return total;
}

/// A neighbor's broadcast plan as seen by the ego planner.
struct NeighborPlan
{
  Trajectory trajectory;
  double heading{0.0};
  double half_length{1.9};
  double half_width{1.0};
};

/// Pins one coordinate (0 = x, 1 = y) of every plan point.
struct LaneLock
{
  int axis{0};
  double value{0.0};
};

struct PlanOptions
{
  std::optional<LaneLock> lane_lock;
  QpSolverOptions solver;
  /// Inside a neighbor, edges this close to the deepest one are ranked by
  /// which side of the neighbor the vehicle currently is on.
  double side_band{0.5};
};

struct PlanResult
{
  Trajectory trajectory;
  Eigen::Vector2d slack{Eigen::Vector2d::Zero()};
  double solve_time{0.0};
  QpStatus qp_status{QpStatus::Optimal};
  int cfs_iterations{0};
  /// Full J (constant included) of the returned plan.
  double objective{0.0};
  /// J after each CFS iteration.
  std::vector<double> objective_history;
};

/// The convexified sub-problem and the half-spaces it was built from.
struct DistributedQp
{
  QuadraticProgram qp;
  /// halfspaces[h] holds one entry per neighbor.
  std::vector<std::vector<HalfSpace>> halfspaces;
};

/**
 * @brief Assemble the QP: objective, slack equality, optional lane lock,
 *        and one CFS half-space per (sample, neighbor) linearized at
 *        `linearization`.
 */
inline DistributedQp assemble_distributed_qp(const Position2 & current, const Trajectory & linearization,
                                             std::span<const NeighborPlan> neighbors, double margin,
                                             const Trajectory & reference, const PlannerWeights & weights,
                                             const PlanOptions & options = {})
{
  const std::size_t H = reference.size();
  if (linearization.size() != H) { throw std::invalid_argument("plan: warm start length differs from horizon"); }
  for (const auto & nb : neighbors) {
    if (nb.trajectory.size() != H) { throw std::invalid_argument("plan: neighbor trajectory length differs from horizon"); }
  }
  const auto n = static_cast<Eigen::Index>(2 * H + 2);

  DistributedQp out;
  const auto obj = build_objective(reference, weights);
  out.qp.Q       = obj.Q;
  out.qp.q       = obj.q;

  const Eigen::Index lock_rows = options.lane_lock ? static_cast<Eigen::Index>(H) : 0;
  out.qp.E = Eigen::MatrixXd::Zero(2 + lock_rows, n);
  out.qp.f = Eigen::VectorXd::Zero(2 + lock_rows);
  // x^1 - s = current
  out.qp.E(0, 0)     = 1.0;
  out.qp.E(1, 1)     = 1.0;
  out.qp.E(0, n - 2) = -1.0;
  out.qp.E(1, n - 1) = -1.0;
  out.qp.f.head<2>() = current;
  if (options.lane_lock) {
    for (std::size_t h = 0; h < H; ++h) {
      out.qp.E(2 + static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(2 * h) + options.lane_lock->axis) = 1.0;
      out.qp.f(2 + static_cast<Eigen::Index>(h)) = options.lane_lock->value;
    }
  }

  const auto m = static_cast<Eigen::Index>(H * neighbors.size());
  out.qp.A     = Eigen::MatrixXd::Zero(m, n);
  out.qp.b     = Eigen::VectorXd::Zero(m);
  out.halfspaces.assign(H, {});
  Eigen::Index row = 0;
  for (std::size_t h = 0; h < H; ++h) {
    for (const auto & nb : neighbors) {
      const VehicleGeometry rect_geom{margin, nb.half_length, nb.half_width};
      const auto rect = neighbor_rect(nb.trajectory, h, nb.heading, rect_geom);
      const auto hs   = cfs_halfspace(linearization[h], rect, margin, Eigen::Vector2d(current - rect.center),
                                      options.side_band);
      out.halfspaces[h].push_back(hs);
      // normal . x >= offset  <=>  -normal . x <= -offset
      out.qp.A.block<1, 2>(row, static_cast<Eigen::Index>(2 * h)) = -hs.normal.transpose();
      out.qp.b(row)                                               = -hs.offset;
      ++row;
    }
  }
  return out;
}

namespace detail {

inline Eigen::VectorXd stack_with_slack(const Trajectory & t, const Position2 & current)
{
  Eigen::VectorXd z(2 * t.size() + 2);
  z.head(2 * t.size()) = t.stacked();
  z.tail<2>()          = t.size() > 0 ? Eigen::Vector2d(t[0] - current) : Eigen::Vector2d::Zero();
  return z;
}

}  // namespace detail

/**
 * @brief One CFS iteration of the distributed planner.
 *
 * Linearizes every neighbor constraint at `warm_start` and solves the
 * resulting QP once. If the QP is not solved to optimality the warm start is
 * returned unchanged and the status says why.
 */
inline PlanResult plan_step(const VehicleState & current, const Trajectory & warm_start,
                            std::span<const NeighborPlan> neighbors, const VehicleGeometry & geometry,
                            const Trajectory & reference, const PlannerWeights & weights,
                            const PlanOptions & options = {}, ActiveSetQpSolver * solver = nullptr)
{
  const auto t0 = std::chrono::steady_clock::now();
  const auto problem =
    assemble_distributed_qp(current.position, warm_start, neighbors, geometry.radius, reference, weights, options);

  ActiveSetQpSolver local(options.solver);
  ActiveSetQpSolver & qp_solver = solver ? *solver : local;
  const auto sol = qp_solver.solve(problem.qp, detail::stack_with_slack(warm_start, current.position));

  PlanResult res;
  res.qp_status      = sol.status;
  res.cfs_iterations = 1;
  if (sol.status == QpStatus::Optimal) {
    const auto H       = static_cast<Eigen::Index>(reference.size());
    res.trajectory     = Trajectory::from_stacked(sol.z.head(2 * H), reference.sample_dt);
    res.slack          = sol.z.tail<2>();
  } else {
    res.trajectory = warm_start;
    res.slack      = warm_start.size() > 0 ? Eigen::Vector2d(warm_start[0] - current.position) : Eigen::Vector2d::Zero();
  }
  res.objective = plan_objective(res.trajectory, res.slack, reference, weights);
  res.objective_history.push_back(res.objective);
  res.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/**
 * @brief Iterate plan_step to a fixed point.
 *
 * Stops when the largest coordinate change between iterates is below `tol`
 * or after `max_iters` iterations. With tol = inf this is one plan_step.
 */
inline PlanResult cfs_solve(const VehicleState & current, const Trajectory & initial,
                            std::span<const NeighborPlan> neighbors, const VehicleGeometry & geometry,
                            const Trajectory & reference, const PlannerWeights & weights, int max_iters, double tol,
                            const PlanOptions & options = {})
{
  const auto t0 = std::chrono::steady_clock::now();
  ActiveSetQpSolver solver(options.solver);
  PlanResult res;
  res.trajectory = initial;
  std::vector<double> history;
  for (int k = 0; k < max_iters; ++k) {
    auto step = plan_step(current, res.trajectory, neighbors, geometry, reference, weights, options, &solver);
    history.push_back(step.objective);
    if (step.qp_status != QpStatus::Optimal) {
      res.qp_status      = step.qp_status;
      res.cfs_iterations = k + 1;
      break;
    }
    const double change = (step.trajectory.stacked() - res.trajectory.stacked()).cwiseAbs().maxCoeff();
    res                 = std::move(step);
    res.cfs_iterations  = k + 1;
    if (change < tol) { break; }
  }
  if (max_iters <= 0) {
    res.slack     = initial.size() > 0 ? Eigen::Vector2d(initial[0] - current.position) : Eigen::Vector2d::Zero();
    res.objective = plan_objective(initial, res.slack, reference, weights);
  }
  res.objective_history = std::move(history);
  res.solve_time        = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

struct CentralizedResult
{
  std::vector<PlanResult> plans;
  QpStatus status{QpStatus::Optimal};
  int iterations{0};
  double solve_time{0.0};
  /// Sum of full objectives after each iteration.
  std::vector<double> objective_history;
};

/**
 * @brief Joint CFS over all vehicles with point-to-point separation d_min.
 *
 * Variables are [x_1; s_1; x_2; s_2; ...]. Each pair constraint
 * ||x_i^h - x_j^h|| >= d_min is linearized in both points around the
 * previous iterate; coincident iterates use the direction (1, 0).
 */
inline CentralizedResult plan_centralized(std::span<const VehicleState> states, std::span<const Trajectory> warm_starts,
                                          std::span<const Trajectory> references, const PlannerWeights & weights,
                                          double d_min, int max_iters, double tol,
                                          std::span<const std::optional<LaneLock>> lane_locks = {},
                                          QpSolverOptions solver_options = {.max_iterations = 2000})
{
  const std::size_t N = states.size();
  if (N < 2 || warm_starts.size() != N || references.size() != N) {
    throw std::invalid_argument("plan_centralized: need N >= 2 and matching list lengths");
  }
  if (!lane_locks.empty() && lane_locks.size() != N) { throw std::invalid_argument("plan_centralized: lane lock count"); }
  const std::size_t H = references[0].size();
  for (std::size_t i = 0; i < N; ++i) {
    if (references[i].size() != H || warm_starts[i].size() != H) {
      throw std::invalid_argument("plan_centralized: trajectory length differs from horizon");
    }
  }
  const auto t0  = std::chrono::steady_clock::now();
  const auto blk = static_cast<Eigen::Index>(2 * H + 2);
  const auto n   = blk * static_cast<Eigen::Index>(N);

  QuadraticProgram qp;
  qp.Q = Eigen::MatrixXd::Zero(n, n);
  qp.q = Eigen::VectorXd::Zero(n);
  Eigen::Index eq_rows = 2 * static_cast<Eigen::Index>(N);
  for (std::size_t i = 0; i < N; ++i) {
    if (!lane_locks.empty() && lane_locks[i]) { eq_rows += static_cast<Eigen::Index>(H); }
  }
  qp.E = Eigen::MatrixXd::Zero(eq_rows, n);
  qp.f = Eigen::VectorXd::Zero(eq_rows);
  Eigen::Index erow = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto off = blk * static_cast<Eigen::Index>(i);
    const auto obj = build_objective(references[i], weights);
    qp.Q.block(off, off, blk, blk) = obj.Q;
    qp.q.segment(off, blk)         = obj.q;
    for (Eigen::Index c = 0; c < 2; ++c) {
      qp.E(erow, off + c)           = 1.0;
      qp.E(erow, off + blk - 2 + c) = -1.0;
      qp.f(erow)                    = states[i].position(c);
      ++erow;
    }
    if (!lane_locks.empty() && lane_locks[i]) {
      for (std::size_t h = 0; h < H; ++h) {
        qp.E(erow, off + static_cast<Eigen::Index>(2 * h) + lane_locks[i]->axis) = 1.0;
        qp.f(erow)                                                                = lane_locks[i]->value;
        ++erow;
      }
    }
  }
  const auto m = static_cast<Eigen::Index>(N * (N - 1) / 2 * H);
  qp.A         = Eigen::MatrixXd::Zero(m, n);
  qp.b         = Eigen::VectorXd::Zero(m);

  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < N; ++i) {
    z.segment(blk * static_cast<Eigen::Index>(i), blk) = detail::stack_with_slack(warm_starts[i], states[i].position);
  }

  auto unpack = [&](const Eigen::VectorXd & v, std::size_t i) {
    const auto off = blk * static_cast<Eigen::Index>(i);
    PlanResult r;
    r.trajectory = Trajectory::from_stacked(v.segment(off, 2 * static_cast<Eigen::Index>(H)), references[i].sample_dt);
    r.slack      = v.segment<2>(off + blk - 2);
    r.objective  = plan_objective(r.trajectory, r.slack, references[i], weights);
    return r;
  };

  CentralizedResult res;
  ActiveSetQpSolver solver(solver_options);
  bool solved_once = false;
  for (int k = 0; k < max_iters; ++k) {
    qp.A.setZero();
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = i + 1; j < N; ++j) {
        for (std::size_t h = 0; h < H; ++h) {
          const auto ci = blk * static_cast<Eigen::Index>(i) + static_cast<Eigen::Index>(2 * h);
          const auto cj = blk * static_cast<Eigen::Index>(j) + static_cast<Eigen::Index>(2 * h);
          const Eigen::Vector2d diff = z.segment<2>(ci) - z.segment<2>(cj);
          const double len           = diff.norm();
          const Eigen::Vector2d dir  = len > 0.0 ? Eigen::Vector2d(diff / len) : Eigen::Vector2d::UnitX();
          // dir . (x_i - x_j) >= d_min
          qp.A.block<1, 2>(row, ci) = -dir.transpose();
          qp.A.block<1, 2>(row, cj) = dir.transpose();
          qp.b(row)                 = -d_min;
          ++row;
        }
      }
    }
    const auto sol = solver.solve(qp, z);
    res.iterations = k + 1;
    if (sol.status != QpStatus::Optimal) {
      res.status = sol.status;
      break;
    }
    const double change = (sol.z - z).cwiseAbs().maxCoeff();
    z                   = sol.z;
    solved_once         = true;
    double total        = 0.0;
    for (std::size_t i = 0; i < N; ++i) { total += unpack(z, i).objective; }
    res.objective_history.push_back(total);
    if (change < tol) { break; }
  }

  res.plans.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    PlanResult r;
    if (res.status == QpStatus::Optimal && solved_once) {
      r = unpack(z, i);
    } else {
      r.trajectory = warm_starts[i];
      r.slack      = warm_starts[i][0] - states[i].position;
      r.objective  = plan_objective(r.trajectory, r.slack, references[i], weights);
    }
    r.qp_status      = res.status;
    r.cfs_iterations = res.iterations;
    res.plans.push_back(std::move(r));
  }
  res.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (auto & r : res.plans) { r.solve_time = res.solve_time; }
  return res;
}

}  // namespace cfsdmpc
