// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cfsdmpc/cfsdmpc.hpp"
#include "oracles/bicycle_rk4.hpp"
#include "oracles/qp_enumeration.hpp"
#include "oracles/random_qp.hpp"

using namespace cfsdmpc;

namespace {

struct Outcome
{
  bool pass;
  std::string detail;
};

std::string format(const char * fmt, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

Outcome safety()
{
  bool ok = true;
  std::string detail;
  for (const auto & name : builtin_scenario_names()) {
    const auto res = run(builtin_scenario(name));
    const auto & m = res.metrics;
    const bool pass = m.collision_free && m.wall_time < 60.0;
    ok              = ok && pass;
    detail += format("%s min %.3f/%.1f %.2fs%s; ", name.c_str(), m.min_distance, m.d_min, m.wall_time,
                     pass ? "" : " FAIL");
  }
  return {ok, detail};
}

Outcome inner_approximation()
{
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> pos(-12.0, 12.0), ang(-std::numbers::pi, std::numbers::pi),
    len(0.2, 3.0), margin(0.5, 4.0);
  std::size_t cases = 0, points = 0;
  double worst = std::numeric_limits<double>::infinity();
  while (cases < 10000) {
    const OrientedRect rect{Position2(pos(rng), pos(rng)), ang(rng), len(rng), len(rng)};
    const double r = margin(rng);
    const auto hs  = cfs_halfspace(Position2(pos(rng), pos(rng)), rect, r);
    bool used      = false;
    for (int k = 0; k < 20; ++k) {
      const Position2 x(pos(rng), pos(rng));
      if (!hs.contains(x)) { continue; }
      used  = true;
      ++points;
      worst = std::min(worst, signed_distance(x, rect).distance - r);
    }
    cases += used ? 1 : 0;
  }
  return {worst >= -1e-9, format("%zu cases, %zu points, worst sd - r = %.3e", cases, points, worst)};
}

Outcome cfs_descent()
{
  // parked car 2 m beside the lane, default weights
  const std::size_t H = 20;
  const double dt     = 0.1;
  Trajectory ref, parked;
  ref.sample_dt = parked.sample_dt = dt;
  for (std::size_t k = 0; k < H; ++k) { ref.points.emplace_back(static_cast<double>(k), 0.0); }
  parked.points.assign(H, Position2(12.0, 2.0));
  const std::vector<NeighborPlan> nb{{parked, 0.0, 1.9, 1.0}};
  const auto res = cfs_solve(VehicleState(Position2(0, 0), 10.0, 0.0), ref, nb, VehicleGeometry{}, ref,
                             PlannerWeights{}, 200, 1e-4);
  const auto & h = res.objective_history;
  bool monotone  = true;
  for (std::size_t k = 1; k < h.size(); ++k) { monotone = monotone && h[k] <= h[k - 1] + 1e-9; }
  const bool converged = res.qp_status == QpStatus::Optimal && res.cfs_iterations < 200;
  return {monotone && converged && h.size() >= 10,
          format("%zu iterations, J %.4f -> %.4f, monotone %s", h.size(), h.front(), h.back(), monotone ? "yes" : "no")};
}

Outcome qp_correctness()
{
  std::mt19937_64 rng(4);
  double worst_z = 0.0, worst_obj = 0.0;
  int failures   = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto qp     = oracle::random_qp(rng, 10, 20);
    const auto sol    = solve(qp);
    const auto expect = oracle::solve_by_enumeration(qp.Q, qp.q, qp.A, qp.b, qp.E, qp.f);
    if (!expect || sol.status != QpStatus::Optimal) {
      ++failures;
      continue;
    }
    worst_z   = std::max(worst_z, (sol.z - expect->z).cwiseAbs().maxCoeff());
    worst_obj = std::max(worst_obj, std::abs(sol.objective_value - expect->objective));
  }
  return {failures == 0 && worst_z <= 1e-6 && worst_obj <= 1e-6,
          format("100 QPs, %d unsolved, max |dz| %.2e, max |dJ| %.2e", failures, worst_z, worst_obj)};
}

Outcome deadlock_reproduction()
{
  const auto spec = builtin_scenario("crossing");
  RunOptions off;
  off.deadlock_resolution = false;
  const auto stuck        = run(spec, off);
  const auto fixed        = run(spec);
  const auto & s = stuck.metrics;
  const auto & f = fixed.metrics;
  double worst_path = 0.0;
  for (const auto & v : f.vehicles) { worst_path = std::max(worst_path, v.final_path_distance); }
  const bool pass = s.longest_deadlock_streak >= 20 && s.collision_free && f.collision_free && worst_path <= 0.1 &&
                    f.replans_to_consensus >= 0 && f.replans_to_consensus <= 10;
  return {pass, format("unresolved streak %zu rounds; resolved: speed change round %ld, consensus round %ld "
                       "(%ld replans), worst path distance %.3f m",
                       s.longest_deadlock_streak, f.first_speed_change_round, f.consensus_round,
                       f.replans_to_consensus, worst_path)};
}

Outcome solve_time()
{
  const auto cmp = compare_centralized(formation_scenario(4));
  const double d = cmp.distributed.metrics.avg_round_solve_time;
  const double c = cmp.centralized.metrics.avg_round_solve_time;
  return {d <= c / 5.0, format("N=4 distributed %.3e s, centralized %.3e s per round (%.1fx)", d, c, c / d)};
}

Outcome cost_ordering()
{
  bool ok = true;
  std::string detail;
  for (std::size_t n = 2; n <= 5; ++n) {
    const auto cmp = compare_centralized(formation_scenario(n));
    const double d = cmp.distributed.metrics.total_objective;
    const double c = cmp.centralized.metrics.total_objective;
    ok             = ok && c <= d;
    detail += format("N=%zu centr %.1f distr %.1f; ", n, c, d);
  }
  for (std::size_t n = 2; n <= 5; ++n) {
    auto tracked         = formation_scenario(n, ControlMode::TrackedControl);
    tracked.replan_dt    = 0.02;
    tracked.sample_dt    = 0.02;
    tracked.total_rounds = 60;
    auto placed          = tracked;
    placed.control       = ControlMode::DirectPlacement;
    const double with    = run(tracked).metrics.total_objective;
    const double without = run(placed).metrics.total_objective;
    ok                   = ok && with >= without;
    detail += format("N=%zu tracking loss %.0f%%; ", n, 100.0 * (with - without) / without);
  }
  return {ok, detail};
}

Outcome tracking()
{
  const auto res = run(builtin_scenario("platoon"));
  double worst   = 0.0;
  for (const auto & v : res.metrics.vehicles) { worst = std::max(worst, v.lane_change_cross_track.value_or(0.0)); }
  return {res.metrics.collision_free && worst <= 0.1,
          format("worst per-vehicle mean lane-change cross-track %.4f m, min distance %.3f m", worst,
                 res.metrics.min_distance)};
}

Outcome kinematics()
{
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> pos(-50.0, 50.0), ang(-std::numbers::pi, std::numbers::pi),
    speed(0.0, 30.0), acc(-kMaxAccel, kMaxAccel), steer(-kMaxSteer, kMaxSteer), dt(0.01, 0.1);
  double worst = 0.0;
  int cases    = 0;
  while (cases < 200) {
    const VehicleState s(Position2(pos(rng), pos(rng)), speed(rng), ang(rng));
    const ControlInput u(acc(rng), steer(rng));
    const PlantParams p{2.8, cases % 2 == 0 ? CurvatureModel::StepLength : CurvatureModel::Wheelbase};
    const double h   = dt(rng);
    const double len = step_length(s.speed, u.accel, h);
    if (len <= 1e-3) { continue; }
    const double kappa = p.curvature == CurvatureModel::StepLength ? std::tan(u.steer) / len
                                                                   : std::tan(u.steer) / p.wheelbase;
    const auto closed = kinematic_step(s, u, p, h);
    const auto ode = oracle::integrate_bicycle({s.position.x(), s.position.y(), s.heading, s.speed}, u.accel, kappa, h);
    worst = std::max(worst, (closed.position - Position2(ode.x, ode.y)).norm());
    ++cases;
  }
  // straddle the straight-line switch at |kappa L| = 1e-8 (L = 1 m here)
  const VehicleState s0(Position2(0, 0), 10.0, 0.3);
  const auto below = kinematic_step(s0, ControlInput(0.0, std::atan(0.999e-8)), PlantParams{}, 0.1);
  const auto above = kinematic_step(s0, ControlInput(0.0, std::atan(1.001e-8)), PlantParams{}, 0.1);
  const double jump = (below.position - above.position).norm();
  return {worst <= 1e-6 && jump < 1e-6,
          format("%d random steps, max error vs RK4 %.2e m, switch discontinuity %.2e m", cases, worst, jump)};
}

Outcome determinism()
{
  const auto root = std::filesystem::temp_directory_path() / "cfsdmpc_acceptance";
  bool ok         = true;
  std::string differing;
  for (const auto & name : builtin_scenario_names()) {
    const auto spec = builtin_scenario(name);
    std::string csv[2];
    for (int k = 0; k < 2; ++k) {
      const auto dir = root / (name + "_" + std::to_string(k));
      export_run(run(spec), spec, dir, false);
      std::ifstream in(dir / "trajectories.csv", std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      csv[k] = ss.str();
    }
    if (csv[0].empty() || csv[0] != csv[1]) {
      ok = false;
      differing += name + " ";
    }
  }
  std::filesystem::remove_all(root);
  return {ok, ok ? std::string("six scenarios, two runs each, identical CSV bytes") : "differs: " + differing};
}

}  // namespace

int main()
{
  const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
    {"safety on built-in scenarios", safety},
    {"CFS half-space inner approximation", inner_approximation},
    {"CFS descent and convergence", cfs_descent},
    {"QP solver vs enumeration", qp_correctness},
    {"deadlock reproduction and resolution", deadlock_reproduction},
    {"distributed vs centralized solve time", solve_time},
    {"cost ordering", cost_ordering},
    {"tracking robustness", tracking},
    {"kinematics vs ODE integration", kinematics},
    {"determinism of CSV export", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception & e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    while (!o.detail.empty() && (o.detail.back() == ';' || o.detail.back() == ' ')) { o.detail.pop_back(); }
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
