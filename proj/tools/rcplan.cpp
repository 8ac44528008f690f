// rcplan: plan / execute / sweep / replay driver for the rcp library.
//
// Exit codes: 0 success, 2 no solution (plan found nothing, or no execution
// run reached the goal), 1 error. RCP_OUT_DIR sets the directory used for
// default output paths.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rcp/harness.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitError = 1;
constexpr int kExitNoSolution = 2;

fs::path out_dir() {
  const char* env = std::getenv("RCP_OUT_DIR");
  return env && *env ? fs::path(env) : fs::path(".");
}

fs::path resolve_out(const std::string& given, const std::string& fallback_name) {
  fs::path p = given.empty() ? out_dir() / fallback_name : fs::path(given);
  if (p.has_parent_path()) {
    fs::create_directories(p.parent_path());
  }
  return p;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out << text;
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Scenario-level overrides shared by the planning subcommands.
struct Overrides {
  std::optional<int> particles;
  std::optional<std::string> method;
  std::optional<double> region_threshold;
  std::optional<double> gamma;
  std::optional<double> importance;
  std::optional<double> planning_seconds;
  std::optional<int> max_iterations;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--particles", particles, "Override particle count N");
    cmd->add_option("--method", method,
                    "Clustering method: pairwise_sim | region_overlap | center_sweep");
    cmd->add_option("--region-threshold", region_threshold,
                    "Region-signature distance threshold (0..1)")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--gamma", gamma, "Actuation noise scale gamma (m/s)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--importance", importance, "Adaptation importance weight A");
    cmd->add_option("--planning-seconds", planning_seconds, "Planning wall-clock budget");
    cmd->add_option("--max-iterations", max_iterations,
                    "Planning iteration cap (0 = wall clock only)");
  }

  void apply(rcp::Scenario& s) const {
    if (particles) {
      s.planner.n_particles = *particles;
    }
    if (method) {
      s.clustering.method = rcp::cluster_method_from_string(*method);
    }
    if (region_threshold) {
      s.clustering.region_threshold = *region_threshold;
    }
    if (gamma) {
      s.noise = rcp::NoiseModel::from_gamma(*gamma);
    }
    if (importance) {
      s.adaptation.a_importance = *importance;
    }
    if (planning_seconds) {
      s.planner.t_planning = *planning_seconds;
    }
    if (max_iterations) {
      s.planner.max_iterations = *max_iterations;
    }
  }
};

int cmd_plan(const std::string& scenario_path, std::uint64_t seed, const Overrides& ov,
             const std::string& out_path) {
  rcp::Scenario scenario = rcp::load_scenario(scenario_path);
  ov.apply(scenario);
  const rcp::SolutionSet s = rcp::plan_scenario(scenario, seed);
  const fs::path out = resolve_out(
      out_path, scenario.name + "_plan_" + std::to_string(seed) + ".jsonl");
  write_file(out, rcp::solution_set_to_trace(s, scenario));
  std::cout << "plan: " << s.solutions.size() << " solution(s), " << s.nodes.size()
            << " nodes, " << s.stats.iterations << " iterations, "
            << s.stats.particles_simulated << " particle simulations, " << std::fixed
            << std::setprecision(1) << s.stats.wall_seconds << " s\n";
  std::cout << "trace: " << out.string() << "\n";
  return s.solutions.empty() ? kExitNoSolution : kExitSuccess;
}

int cmd_execute(const std::string& scenario_path, const std::string& trace_path,
                std::uint64_t seed, int runs, bool blocked,
                const std::vector<unsigned>& block_regions, bool fresh_policy,
                double sim_budget, int max_actions, const Overrides& ov,
                const std::string& report_path, const std::string& trace_out,
                bool with_paths) {
  rcp::Scenario scenario = rcp::load_scenario(scenario_path);
  ov.apply(scenario);
  const rcp::SolutionSet s = rcp::solution_set_from_trace(read_file(trace_path), &scenario);

  rcp::ExecutionBatchOptions options;
  options.n_runs = runs;
  options.master_seed = seed;
  options.sim_budget_seconds = sim_budget;
  options.max_actions = max_actions;
  options.block_initial_route = blocked;
  options.blocked_regions.insert(block_regions.begin(), block_regions.end());
  options.keep_adaptation = !fresh_policy;

  std::vector<rcp::ExecutionResult> results;
  const rcp::ExperimentReport report =
      rcp::execute_policy_runs(scenario, s, options, trace_out.empty() ? nullptr : &results);

  const fs::path out = resolve_out(
      report_path, scenario.name + "_report_" + std::to_string(seed) + ".json");
  write_file(out, report.to_json());

  if (!trace_out.empty()) {
    const fs::path tdir = fs::path(trace_out);
    fs::create_directories(tdir);
    for (std::size_t i = 0; i < results.size(); ++i) {
      const fs::path tp = tdir / ("run_" + std::to_string(i) + ".jsonl");
      write_file(tp, rcp::execution_to_trace(results[i], scenario, report.runs[i].seed,
                                             with_paths));
    }
  }

  std::cout << std::fixed << std::setprecision(3);
  for (const rcp::RunRecord& r : report.runs) {
    std::cout << "run " << r.run_index << ": " << r.outcome << ", " << r.actions
              << " actions, " << std::setprecision(1) << r.sim_seconds << " s sim"
              << std::setprecision(3);
    if (r.observed_insertions > 0) {
      std::cout << ", " << r.observed_insertions << " observed node(s)";
    }
    std::cout << "\n";
  }
  std::cout << "success rate " << report.success_rate() << ", actions "
            << report.mean_actions_successful() << " ["
            << report.stddev_actions_successful() << "]\n";
  std::cout << "report: " << out.string() << "\n";
  return report.success_rate() > 0.0 ? kExitSuccess : kExitNoSolution;
}

int cmd_sweep(const std::string& scenario_path, std::uint64_t seed,
              const std::vector<double>& gammas, const std::vector<double>& thresholds,
              int plans, int runs, double sim_budget, int max_actions, const Overrides& ov,
              const std::string& out_path) {
  rcp::Scenario scenario = rcp::load_scenario(scenario_path);
  ov.apply(scenario);

  rcp::SweepOptions options;
  options.gammas = gammas;
  options.region_thresholds = thresholds;
  options.n_plans = plans;
  options.n_runs = runs;
  options.master_seed = seed;
  options.sim_budget_seconds = sim_budget;
  options.max_actions = max_actions;

  const std::vector<rcp::SweepCell> cells = rcp::run_sweep(scenario, options);
  const fs::path out = resolve_out(
      out_path, scenario.name + "_sweep_" + std::to_string(seed) + ".json");
  write_file(out, rcp::sweep_to_json(cells, scenario));

  std::cout << std::left << std::setw(18) << "axis" << std::setw(10) << "value"
            << std::setw(8) << "P_plan" << std::setw(8) << "P_exec"
            << "actions mean [std]\n";
  std::cout << std::fixed << std::setprecision(3);
  for (const rcp::SweepCell& c : cells) {
    const double p_plan =
        c.plans_attempted > 0
            ? static_cast<double>(c.plans_with_solution) / c.plans_attempted
            : 0.0;
    std::cout << std::left << std::setw(18) << c.axis << std::setw(10) << c.value
              << std::setw(8) << p_plan << std::setw(8) << c.executions.success_rate()
              << c.executions.mean_actions_successful() << " ["
              << c.executions.stddev_actions_successful() << "]\n";
  }
  std::cout << "table: " << out.string() << "\n";
  return kExitSuccess;
}

int cmd_replay(const std::string& scenario_path, const std::string& trace_path) {
  rcp::Scenario scenario = rcp::load_scenario(scenario_path);
  const std::string text = read_file(trace_path);
  const rcp::SolutionSet s = rcp::solution_set_from_trace(text, &scenario);
  const std::string again = rcp::solution_set_to_trace(s, scenario);
  const bool stable = again == text;

  const rcp::VoxelEnvironment env = scenario.planning_environment();
  const rcp::Simulator sim(env, scenario.robot, scenario.metric, scenario.gains,
                           scenario.noise, 0.25 * scenario.eps_goal);
  const rcp::ClusterEngine engine(sim, scenario.clustering, scenario.eps_goal);
  const rcp::Policy policy(s, scenario.goal, scenario.planner, scenario.adaptation, engine);

  std::cout << "trace: " << s.nodes.size() << " nodes, " << s.solutions.size()
            << " solution(s), seed " << s.seed << "\n";
  std::cout << "policy: " << policy.vertices().size() << " vertices, "
            << policy.edges().size() << " edges, route success probability "
            << std::fixed << std::setprecision(4)
            << policy.route_goal_probability(policy.start_vertex()) << "\n";
  std::cout << "round-trip: " << (stable ? "byte-identical" : "MISMATCH") << "\n";
  return stable ? kExitSuccess : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-policy motion planning under actuation uncertainty"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string trace_path;
  std::string out_path;
  std::string report_path;
  std::string trace_out;
  std::uint64_t seed = 0;
  int runs = 8;
  int plans = 3;
  bool blocked = false;
  bool fresh_policy = false;
  bool with_paths = false;
  double sim_budget = 600.0;
  int max_actions = 200;
  std::vector<double> gammas;
  std::vector<double> thresholds;
  std::vector<unsigned> block_regions;
  Overrides ov;

  CLI::App* plan = app.add_subcommand("plan", "Grow a belief tree and store the plan trace");
  plan->add_option("--scenario", scenario_path, "Scenario file")->required();
  plan->add_option("--seed", seed, "Master random seed");
  plan->add_option("--out", out_path, "Plan trace output path (.jsonl)");
  ov.add_flags(plan);

  CLI::App* exec = app.add_subcommand("execute", "Execute a planned policy with adaptation");
  exec->add_option("--scenario", scenario_path, "Scenario file")->required();
  exec->add_option("--plan", trace_path, "Plan trace from `rcplan plan`")->required();
  exec->add_option("--seed", seed, "Master random seed");
  exec->add_option("--runs", runs, "Executions of the policy")->check(CLI::PositiveNumber);
  exec->add_flag("--blocked", blocked,
                 "Block the passage regions used by the policy's initial route");
  exec->add_option("--block-region", block_regions,
                   "Region ids whose blockers to activate")
      ->delimiter(',');
  exec->add_flag("--fresh-policy", fresh_policy, "Reset adaptation between runs");
  exec->add_option("--sim-budget", sim_budget, "Simulated seconds allowed per run");
  exec->add_option("--max-actions", max_actions, "Action cap per run");
  exec->add_option("--report", report_path, "Report output path (.json)");
  exec->add_option("--trace-dir", trace_out, "Directory for per-run execution traces");
  exec->add_flag("--with-paths", with_paths, "Embed full trajectories in execution traces");
  ov.add_flags(exec);

  CLI::App* sweep = app.add_subcommand("sweep", "Plan/execute over a parameter grid");
  sweep->add_option("--scenario", scenario_path, "Scenario file")->required();
  sweep->add_option("--seed", seed, "Master random seed");
  sweep->add_option("--gamma-grid", gammas, "Gamma values to sweep")->delimiter(',');
  sweep->add_option("--threshold-grid", thresholds,
                    "Region-signature thresholds to sweep")
      ->delimiter(',');
  sweep->add_option("--plans", plans, "Plans per grid value")->check(CLI::PositiveNumber);
  sweep->add_option("--runs", runs, "Executions per plan")->check(CLI::PositiveNumber);
  sweep->add_option("--sim-budget", sim_budget, "Simulated seconds allowed per run");
  sweep->add_option("--max-actions", max_actions, "Action cap per run");
  sweep->add_option("--out", out_path, "Sweep table output path (.json)");
  ov.add_flags(sweep);

  CLI::App* replay = app.add_subcommand("replay", "Rebuild a policy from a stored plan trace");
  replay->add_option("--scenario", scenario_path, "Scenario file")->required();
  replay->add_option("--trace", trace_path, "Plan trace file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed()) {
      return cmd_plan(scenario_path, seed, ov, out_path);
    }
    if (exec->parsed()) {
      return cmd_execute(scenario_path, trace_path, seed, runs, blocked, block_regions,
                         fresh_policy, sim_budget, max_actions, ov, report_path, trace_out,
                         with_paths);
    }
    if (sweep->parsed()) {
      return cmd_sweep(scenario_path, seed, gammas, thresholds, plans, runs, sim_budget,
                       max_actions, ov, out_path);
    }
    if (replay->parsed()) {
      return cmd_replay(scenario_path, trace_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
