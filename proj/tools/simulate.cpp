// Command-line driver: run a built-in or file scenario and export the results.

#include <CLI11.hpp>

#include <cfsdmpc/cfsdmpc.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace {

cfsdmpc::ScenarioSpec load(const std::string & name_or_file)
{
  for (const auto & n : cfsdmpc::builtin_scenario_names()) {
    if (n == name_or_file) { return cfsdmpc::builtin_scenario(n); }
  }
  if (std::filesystem::exists(name_or_file)) { return cfsdmpc::load_scenario_file(name_or_file); }
  return cfsdmpc::builtin_scenario(name_or_file);  // throws with the list of names
}

void summary(const char * label, const cfsdmpc::RunMetrics & m)
{
  std::printf("%s: rounds=%zu min_distance=%.4f (d_min %.2f) %s\n", label, m.rounds, m.min_distance, m.d_min,
              m.collision_free ? "collision-free" : "SAFETY VIOLATION");
  std::printf("  avg round solve time %.3e s, max %.3e s, total cost %.6g\n", m.avg_round_solve_time,
              m.max_round_solve_time, m.total_cost);
  std::printf("  consensus round %ld, first speed change %ld, hold replans %zu, infeasible solves %zu, wall %.2f s\n",
              m.consensus_round, m.first_speed_change_round, m.hold_replans, m.infeasible_solves, m.wall_time);
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Distributed CFS motion planning simulator"};
  std::string scenario;
  std::string out_dir;
  std::size_t rounds = 0;
  bool centralized   = false;
  bool no_deadlock   = false;
  std::uint64_t seed = 0;
  bool svg           = false;
  bool compare       = false;
  unsigned threads   = 1;
  std::string dump_qp;
  std::string write_scenario;

  app.add_option("--scenario", scenario, "built-in name or JSON scenario file")->required();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--rounds", rounds, "override the number of rounds");
  app.add_flag("--centralized", centralized, "plan with the joint centralized solver");
  app.add_flag("--no-deadlock-resolution", no_deadlock, "disable speed reassignment");
  app.add_option("--seed", seed, "seed for the initial position jitter");
  app.add_flag("--svg", svg, "also write trajectories.svg");
  app.add_flag("--compare", compare, "run distributed and centralized, write both");
  app.add_option("--threads", threads, "planner threads per round")->check(CLI::PositiveNumber);
  app.add_option("--dump-qp", dump_qp, "write every round-0 distributed QP as text into this directory");
  app.add_option("--write-scenario", write_scenario, "write the resolved scenario as JSON to this file");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto spec = load(scenario);
    if (const auto errs = cfsdmpc::validate_scenario(spec); !errs.empty()) {
      std::cerr << "invalid scenario:\n";
      for (const auto & e : errs) { std::cerr << "  " << e << '\n'; }
      return 1;
    }
    if (!write_scenario.empty()) {
      std::ofstream f(write_scenario);
      if (!f) { throw std::runtime_error("cannot write '" + write_scenario + "'"); }
      f << cfsdmpc::scenario_to_json(spec).dump(2) << '\n';
    }

    cfsdmpc::RunOptions opts;
    opts.deadlock_resolution = !no_deadlock;
    opts.centralized         = centralized;
    opts.seed                = seed;
    opts.threads             = threads;
    if (rounds > 0) { opts.rounds = rounds; }
    if (!dump_qp.empty()) {
      std::filesystem::create_directories(dump_qp);
      opts.on_qp = [&](long round, std::size_t vehicle, const cfsdmpc::QuadraticProgram & qp) {
        if (round != 0) { return; }
        const auto path = std::filesystem::path(dump_qp) / ("qp_round0_vehicle" + std::to_string(vehicle) + ".txt");
        std::ofstream f(path);
        if (!f) { throw std::runtime_error("cannot write '" + path.string() + "'"); }
        cfsdmpc::write_qp_text(f, qp);
      };
    }

    bool safe = true;
    if (compare) {
      const auto cmp = cfsdmpc::compare_centralized(spec, opts);
      cfsdmpc::export_run(cmp.distributed, spec, std::filesystem::path(out_dir) / "distributed", svg);
      cfsdmpc::export_run(cmp.centralized, spec, std::filesystem::path(out_dir) / "centralized", svg);
      summary("distributed", cmp.distributed.metrics);
      summary("centralized", cmp.centralized.metrics);
      const double ratio = cmp.distributed.metrics.avg_round_solve_time > 0.0
                             ? cmp.centralized.metrics.avg_round_solve_time / cmp.distributed.metrics.avg_round_solve_time
                             : 0.0;
      std::printf("centralized / distributed avg round time: %.2f\n", ratio);
      safe = cmp.distributed.metrics.collision_free && cmp.centralized.metrics.collision_free;
    } else {
      const auto res = cfsdmpc::run(spec, opts);
      cfsdmpc::export_run(res, spec, out_dir, svg);
      summary(centralized ? "centralized" : "distributed", res.metrics);
      safe = res.metrics.collision_free;
    }
    return safe ? 0 : 2;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
