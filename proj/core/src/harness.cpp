#include "rcp/harness.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rcp {

namespace {

using nlohmann::json;

json config_to_json(const Configuration& q) {
  json j;
  json t = json::array();
  for (int d = 0; d < linear_dims(q.space); ++d) {
    t.push_back(q.translation[d]);
  }
  j["t"] = std::move(t);
  // Rotations serialize as raw quaternion coefficients in both spaces so the
  // round trip is bit-exact (angle forms would re-derive through atan2).
  j["q"] = json::array(
      {q.rotation.w(), q.rotation.x(), q.rotation.y(), q.rotation.z()});
  return j;
}

Configuration config_from_json(const json& j, SpaceType space) {
  Configuration q;
  q.space = space;
  const json& t = j.at("t");
  for (int d = 0; d < linear_dims(space); ++d) {
    q.translation[d] = t.at(d).get<double>();
  }
  const json& r = j.at("q");
  // Assign coefficients directly: the source was normalized and re-normalizing
  // here would perturb bits and break byte-stable re-serialization.
  q.rotation = Eigen::Quaterniond(r.at(0).get<double>(), r.at(1).get<double>(),
                                  r.at(2).get<double>(), r.at(3).get<double>());
  return q;
}

json belief_to_json(const BeliefState& b) {
  json arr = json::array();
  for (const Configuration& q : b) {
    arr.push_back(config_to_json(q));
  }
  return arr;
}

std::string space_name(SpaceType s) { return s == SpaceType::SE2 ? "SE2" : "SE3"; }

}  // namespace

std::uint64_t plan_seed(std::uint64_t master, int plan_index) {
  return derive_seed(master, static_cast<std::uint64_t>(plan_index));
}

std::uint64_t exec_seed(std::uint64_t master, int plan_index, int run_index) {
  return derive_seed(derive_seed(master, 0x10000ULL + static_cast<std::uint64_t>(plan_index)),
                     static_cast<std::uint64_t>(run_index));
}

SolutionSet plan_scenario(const Scenario& scenario, std::uint64_t seed) {
  const VoxelEnvironment env = scenario.planning_environment();
  const Simulator sim(env, scenario.robot, scenario.metric, scenario.gains, scenario.noise,
                      0.25 * scenario.eps_goal);
  const ClusterEngine engine(sim, scenario.clustering, scenario.eps_goal);
  BeliefPlanner planner(engine, scenario.sampling, scenario.planner);
  return planner.plan(scenario.start, scenario.goal, seed);
}

std::string solution_set_to_trace(const SolutionSet& s, const Scenario& scenario) {
  std::ostringstream out;
  json meta;
  meta["record"] = "meta";
  meta["format"] = 1;
  meta["kind"] = "plan";
  meta["scenario"] = scenario.name;
  meta["space"] = space_name(scenario.space);
  meta["seed"] = s.seed;
  meta["n_particles"] = scenario.planner.n_particles;
  meta["next_action_id"] = s.next_action_id;
  out << meta.dump() << "\n";

  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    const PlannerNode& n = s.nodes[i];
    json jn;
    jn["record"] = "node";
    jn["id"] = i;
    jn["parent"] = n.parent;
    jn["action_id"] = n.action_id;
    jn["action"] = config_to_json(n.action);
    jn["p_transition"] = n.p_transition;
    jn["p_effective"] = n.p_effective;
    jn["p_path"] = n.p_path;
    jn["reverse_attempts"] = n.reverse_attempts;
    jn["reverse_successes"] = n.reverse_successes;
    jn["split"] = n.is_split_result;
    jn["belief"] = belief_to_json(n.belief);
    out << jn.dump() << "\n";
  }
  for (const std::vector<int>& path : s.solutions) {
    json js;
    js["record"] = "solution";
    js["path"] = path;
    out << js.dump() << "\n";
  }
  json je;
  je["record"] = "excluded";
  je["nodes"] = std::vector<int>(s.nn_excluded.begin(), s.nn_excluded.end());
  out << je.dump() << "\n";
  json jt;
  jt["record"] = "stats";
  jt["iterations"] = s.stats.iterations;
  jt["extend_calls"] = s.stats.extend_calls;
  jt["particles_simulated"] = s.stats.particles_simulated;
  out << jt.dump() << "\n";
  return out.str();
}

SolutionSet solution_set_from_trace(const std::string& text, const Scenario* scenario) {
  SolutionSet s;
  SpaceType space = SpaceType::SE2;
  bool have_meta = false;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string record = j.value("record", "");
    if (record == "meta") {
      if (j.value("kind", "") != "plan") {
        throw std::runtime_error("trace is not a plan trace");
      }
      space = j.value("space", "SE2") == "SE3" ? SpaceType::SE3 : SpaceType::SE2;
      s.seed = j.value("seed", 0ULL);
      s.next_action_id = j.value("next_action_id", 1ULL);
      if (scenario) {
        if (j.value("scenario", "") != scenario->name) {
          throw std::runtime_error("trace was produced for scenario '" +
                                   j.value("scenario", std::string()) + "', not '" +
                                   scenario->name + "'");
        }
        if (j.value("space", "") != space_name(scenario->space)) {
          throw std::runtime_error("trace/scenario space mismatch");
        }
      }
      have_meta = true;
    } else if (record == "node") {
      PlannerNode n;
      n.parent = j.at("parent").get<int>();
      n.action_id = j.at("action_id").get<std::uint64_t>();
      n.action = config_from_json(j.at("action"), space);
      n.p_transition = j.at("p_transition").get<double>();
      n.p_effective = j.at("p_effective").get<double>();
      n.p_path = j.at("p_path").get<double>();
      n.reverse_attempts = j.at("reverse_attempts").get<int>();
      n.reverse_successes = j.at("reverse_successes").get<int>();
      n.is_split_result = j.at("split").get<bool>();
      for (const json& jq : j.at("belief")) {
        n.belief.push_back(config_from_json(jq, space));
      }
      if (n.belief.empty()) {
        throw std::runtime_error("trace line " + std::to_string(line_no) + ": empty belief");
      }
      n.expectation = expect(n.belief);
      n.variance_l1 = variance_l1(n.belief);
      const std::size_t id = j.at("id").get<std::size_t>();
      if (id != s.nodes.size()) {
        throw std::runtime_error("trace line " + std::to_string(line_no) +
                                 ": non-sequential node id");
      }
      s.nodes.push_back(std::move(n));
    } else if (record == "solution") {
      s.solutions.push_back(j.at("path").get<std::vector<int>>());
    } else if (record == "excluded") {
      for (const json& v : j.at("nodes")) {
        s.nn_excluded.insert(v.get<int>());
      }
    } else if (record == "stats") {
      s.stats.iterations = j.value("iterations", 0);
      s.stats.extend_calls = j.value("extend_calls", 0);
      s.stats.particles_simulated = j.value("particles_simulated", 0LL);
    }
  }
  if (!have_meta || s.nodes.empty()) {
    throw std::runtime_error("trace has no meta/node records");
  }
  for (const std::vector<int>& path : s.solutions) {
    for (int idx : path) {
      if (idx < 0 || idx >= static_cast<int>(s.nodes.size())) {
        throw std::runtime_error("trace solution references unknown node");
      }
    }
  }
  return s;
}

double ExperimentReport::success_rate() const {
  if (runs.empty()) {
    return 0.0;
  }
  std::size_t ok = 0;
  for (const RunRecord& r : runs) {
    ok += r.outcome == "success";
  }
  return static_cast<double>(ok) / static_cast<double>(runs.size());
}

double ExperimentReport::mean_actions_successful() const {
  double sum = 0.0;
  int n = 0;
  for (const RunRecord& r : runs) {
    if (r.outcome == "success") {
      sum += r.actions;
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

double ExperimentReport::stddev_actions_successful() const {
  const double mean = mean_actions_successful();
  double sum = 0.0;
  int n = 0;
  for (const RunRecord& r : runs) {
    if (r.outcome == "success") {
      const double d = r.actions - mean;
      sum += d * d;
      ++n;
    }
  }
  return n > 0 ? std::sqrt(sum / n) : 0.0;
}

std::string ExperimentReport::to_json() const {
  json j;
  j["scenario"] = scenario;
  j["label"] = label;
  json arr = json::array();
  for (const RunRecord& r : runs) {
    json jr;
    jr["policy_index"] = r.policy_index;
    jr["run_index"] = r.run_index;
    jr["seed"] = r.seed;
    jr["outcome"] = r.outcome;
    jr["actions"] = r.actions;
    jr["sim_seconds"] = r.sim_seconds;
    jr["observed_insertions"] = r.observed_insertions;
    jr["passages"] = r.passages;
    arr.push_back(std::move(jr));
  }
  j["runs"] = std::move(arr);
  j["aggregates"]["success_rate"] = success_rate();
  j["aggregates"]["mean_actions_successful"] = mean_actions_successful();
  j["aggregates"]["stddev_actions_successful"] = stddev_actions_successful();
  return j.dump();
}

namespace {

std::vector<std::uint32_t> passages_touched(const VoxelEnvironment& env,
                                            const std::vector<std::uint32_t>& passage_regions,
                                            const std::vector<Configuration>& trajectory) {
  std::set<std::uint32_t> hit;
  for (const Configuration& q : trajectory) {
    const std::uint32_t mask = env.region_mask(q.translation);
    for (std::uint32_t id : passage_regions) {
      if (mask & (1u << id)) {
        hit.insert(id);
      }
    }
  }
  return {hit.begin(), hit.end()};
}

}  // namespace

ExperimentReport execute_policy_runs(const Scenario& scenario, const SolutionSet& solutions,
                                     const ExecutionBatchOptions& options,
                                     std::vector<ExecutionResult>* results) {
  const VoxelEnvironment plan_env = scenario.planning_environment();
  const Simulator plan_sim(plan_env, scenario.robot, scenario.metric, scenario.gains,
                           scenario.noise, 0.25 * scenario.eps_goal);
  const ClusterEngine engine(plan_sim, scenario.clustering, scenario.eps_goal);

  std::set<std::uint32_t> blocked = options.blocked_regions;
  if (options.block_initial_route) {
    const std::set<std::uint32_t> initial = initial_route_passages(scenario, solutions);
    blocked.insert(initial.begin(), initial.end());
  }
  const bool altered = !blocked.empty() || !scenario.extra_obstacles.empty();
  const VoxelEnvironment exec_env =
      altered ? scenario.execution_environment(blocked) : scenario.planning_environment();
  const Simulator exec_sim(exec_env, scenario.robot, scenario.metric, scenario.gains,
                           scenario.noise, 0.25 * scenario.eps_goal);

  ExperimentReport report;
  report.scenario = scenario.name;
  report.label = altered ? "blocked" : "unblocked";

  std::optional<Policy> policy;
  policy.emplace(solutions, scenario.goal, scenario.planner, scenario.adaptation, engine);
  for (int run = 0; run < options.n_runs; ++run) {
    if (!options.keep_adaptation && run > 0) {
      policy.emplace(solutions, scenario.goal, scenario.planner, scenario.adaptation, engine);
    }
    const std::uint64_t seed = exec_seed(options.master_seed, options.policy_index, run);
    const ExecutionResult res =
        execute_policy(*policy, exec_sim, scenario.detector, scenario.start, scenario.goal,
                       scenario.eps_goal, options.sim_budget_seconds, options.max_actions, seed);
    RunRecord rec;
    rec.policy_index = options.policy_index;
    rec.run_index = run;
    rec.seed = seed;
    rec.outcome = to_string(res.outcome);
    rec.actions = res.actions;
    rec.sim_seconds = res.sim_seconds;
    rec.observed_insertions = res.observed_insertions;
    rec.passages = passages_touched(plan_env, scenario.passage_regions, res.trajectory);
    report.runs.push_back(std::move(rec));
    if (results) {
      results->push_back(res);
    }
  }
  return report;
}

std::set<std::uint32_t> initial_route_passages(const Scenario& scenario,
                                               const SolutionSet& solutions) {
  const VoxelEnvironment env = scenario.planning_environment();
  const Simulator noiseless(env, scenario.robot, scenario.metric, scenario.gains,
                            NoiseModel::zero(), 0.25 * scenario.eps_goal);
  const ClusterEngine engine(noiseless, scenario.clustering, scenario.eps_goal);
  Policy policy(solutions, scenario.goal, scenario.planner, scenario.adaptation, engine);
  const ExecutionResult res =
      execute_policy(policy, noiseless, scenario.detector, scenario.start, scenario.goal,
                     scenario.eps_goal, 0.0, 100, 0);
  const std::vector<std::uint32_t> hit =
      passages_touched(env, scenario.passage_regions, res.trajectory);
  return {hit.begin(), hit.end()};
}

std::string execution_to_trace(const ExecutionResult& result, const Scenario& scenario,
                               std::uint64_t seed, bool include_trajectories) {
  std::ostringstream out;
  json meta;
  meta["record"] = "meta";
  meta["format"] = 1;
  meta["kind"] = "execution";
  meta["scenario"] = scenario.name;
  meta["space"] = space_name(scenario.space);
  meta["seed"] = seed;
  meta["outcome"] = to_string(result.outcome);
  meta["actions"] = result.actions;
  meta["sim_seconds"] = result.sim_seconds;
  meta["observed_insertions"] = result.observed_insertions;
  out << meta.dump() << "\n";
  for (const ActionRecord& a : result.action_log) {
    json ja;
    ja["record"] = "action";
    ja["index"] = a.index;
    ja["matched_vertex"] = a.matched_vertex;
    ja["action_id"] = a.action_id;
    ja["target"] = config_to_json(a.target);
    ja["result"] = config_to_json(a.result);
    ja["sim_steps"] = a.sim_steps;
    ja["sim_outcome"] = a.sim_outcome;
    ja["route_probability"] = a.route_probability;
    out << ja.dump() << "\n";
  }
  for (const Policy::EventRecord& e : result.event_log) {
    json je;
    je["record"] = "event";
    je["action_index"] = e.action_index;
    je["kind"] = e.kind;
    je["from"] = e.edge_from;
    je["to"] = e.edge_to;
    je["probability"] = e.probability;
    out << je.dump() << "\n";
  }
  if (include_trajectories) {
    json jp;
    jp["record"] = "path";
    json arr = json::array();
    for (const Configuration& q : result.trajectory) {
      arr.push_back(config_to_json(q));
    }
    jp["configs"] = std::move(arr);
    out << jp.dump() << "\n";
  }
  return out.str();
}

std::vector<SweepCell> run_sweep(const Scenario& base, const SweepOptions& options) {
  struct Axis {
    std::string name;
    std::vector<double> values;
  };
  std::vector<Axis> axes;
  if (!options.gammas.empty()) {
    axes.push_back({"gamma", options.gammas});
  }
  if (!options.region_thresholds.empty()) {
    axes.push_back({"region_threshold", options.region_thresholds});
  }
  if (axes.empty()) {
    throw std::invalid_argument("run_sweep: empty parameter grid");
  }

  std::vector<SweepCell> cells;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    for (std::size_t vi = 0; vi < axes[a].values.size(); ++vi) {
      const double value = axes[a].values[vi];
      Scenario scenario = base;
      if (axes[a].name == "gamma") {
        scenario.noise = NoiseModel::from_gamma(value);
      } else {
        scenario.clustering.region_threshold = value;
      }
      SweepCell cell;
      cell.axis = axes[a].name;
      cell.value = value;
      cell.executions.scenario = scenario.name;
      cell.executions.label = axes[a].name + "=" + std::to_string(value);
      const std::uint64_t cell_seed =
          derive_seed(options.master_seed, a * 1000 + vi);
      for (int p = 0; p < options.n_plans; ++p) {
        cell.plans_attempted += 1;
        const SolutionSet s = plan_scenario(scenario, plan_seed(cell_seed, p));
        if (s.solutions.empty()) {
          continue;
        }
        cell.plans_with_solution += 1;
        ExecutionBatchOptions ebo;
        ebo.n_runs = options.n_runs;
        ebo.master_seed = cell_seed;
        ebo.policy_index = p;
        ebo.sim_budget_seconds = options.sim_budget_seconds;
        ebo.max_actions = options.max_actions;
        const ExperimentReport r = execute_policy_runs(scenario, s, ebo);
        cell.executions.runs.insert(cell.executions.runs.end(), r.runs.begin(), r.runs.end());
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::string sweep_to_json(const std::vector<SweepCell>& cells, const Scenario& scenario) {
  json j;
  j["scenario"] = scenario.name;
  json arr = json::array();
  for (const SweepCell& c : cells) {
    json jc;
    jc["axis"] = c.axis;
    jc["value"] = c.value;
    jc["plans_attempted"] = c.plans_attempted;
    jc["plans_with_solution"] = c.plans_with_solution;
    jc["p_plan"] = c.plans_attempted > 0
                       ? static_cast<double>(c.plans_with_solution) / c.plans_attempted
                       : 0.0;
    jc["p_exec"] = c.executions.success_rate();
    jc["mean_actions"] = c.executions.mean_actions_successful();
    jc["stddev_actions"] = c.executions.stddev_actions_successful();
    jc["runs"] = c.executions.runs.size();
    arr.push_back(std::move(jc));
  }
  j["cells"] = std::move(arr);
  return j.dump();
}

}  // namespace rcp
