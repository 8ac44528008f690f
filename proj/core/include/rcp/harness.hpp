#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "rcp/scenario.hpp"

namespace rcp {

/// Derivation scheme for all experiment seeds: plan i of a batch uses
/// plan_seed(master, i); execution run j of policy i uses
/// exec_seed(master, i, j). Documented so reports are reproducible.
std::uint64_t plan_seed(std::uint64_t master, int plan_index);
std::uint64_t exec_seed(std::uint64_t master, int plan_index, int run_index);

/// Runs the planner on a scenario with self-contained environment/simulator
/// setup. Honors the scenario's iteration and/or wall-clock budget.
SolutionSet plan_scenario(const Scenario& scenario, std::uint64_t seed);

/// Line-delimited structured trace of a solution set (nodes with beliefs,
/// solution paths, pruned set, stats). Deterministic fields only: the same
/// tree always serializes to identical bytes.
std::string solution_set_to_trace(const SolutionSet& s, const Scenario& scenario);

/// Parses a plan trace back into a SolutionSet. Throws std::runtime_error on
/// malformed input or a scenario-name/space mismatch when scenario given.
SolutionSet solution_set_from_trace(const std::string& text, const Scenario* scenario = nullptr);

struct RunRecord {
  int policy_index = 0;
  int run_index = 0;
  std::uint64_t seed = 0;
  std::string outcome;  ///< success | failure | timeout
  int actions = 0;
  double sim_seconds = 0.0;
  int observed_insertions = 0;
  std::vector<std::uint32_t> passages;  ///< passage regions the run moved through
};

/// Aggregated experiment outcome; aggregates are always recomputed from the
/// records, never stored separately.
struct ExperimentReport {
  std::string scenario;
  std::string label;
  std::vector<RunRecord> runs;

  double success_rate() const;
  double mean_actions_successful() const;
  double stddev_actions_successful() const;
  /// Canonical JSON (sorted keys, no wall-clock fields): byte-stable across
  /// identical reruns.
  std::string to_json() const;
};

struct ExecutionBatchOptions {
  int n_runs = 8;
  std::uint64_t master_seed = 0;
  int policy_index = 0;
  double sim_budget_seconds = 600.0;
  int max_actions = 200;
  /// Activate the blockers of the passage regions on the policy's own
  /// unperturbed route (computed via initial_route_passages).
  bool block_initial_route = false;
  /// Explicitly activated blocker regions (united with the above).
  std::set<std::uint32_t> blocked_regions;
  bool keep_adaptation = true; ///< reuse the adapted policy across runs
};

/// Executes a planned policy n_runs times with derived per-run seeds on the
/// scenario's execution environment. The policy graph persists across runs
/// (observed vertices and adapted counts carry over). Also records, per run,
/// which passage regions the robot's origin traversed. When `results` is
/// given, the full per-run execution records (action/event logs, trajectory)
/// are appended to it.
ExperimentReport execute_policy_runs(const Scenario& scenario, const SolutionSet& solutions,
                                     const ExecutionBatchOptions& options,
                                     std::vector<ExecutionResult>* results = nullptr);

/// Passage regions of the policy's unperturbed route: a zero-noise execution
/// in the planning environment, reported as the set of passage-region ids the
/// robot's origin enters.
std::set<std::uint32_t> initial_route_passages(const Scenario& scenario,
                                               const SolutionSet& solutions);

/// Execution trace (one line per action plus adaptation events), suitable for
/// offline plotting. include_trajectories embeds full per-action paths.
std::string execution_to_trace(const ExecutionResult& result, const Scenario& scenario,
                               std::uint64_t seed, bool include_trajectories = false);

struct SweepCell {
  std::string axis;    ///< "gamma" or "region_threshold"
  double value = 0.0;
  int plans_attempted = 0;
  int plans_with_solution = 0;
  ExperimentReport executions;
};

struct SweepOptions {
  std::vector<double> gammas;
  std::vector<double> region_thresholds;
  int n_plans = 3;
  int n_runs = 2;
  std::uint64_t master_seed = 0;
  double sim_budget_seconds = 600.0;
  int max_actions = 200;
};

/// Parameter sweep: for each grid value, re-plan n_plans times and execute
/// each successful plan n_runs times. Returns one cell per grid value.
std::vector<SweepCell> run_sweep(const Scenario& base, const SweepOptions& options);

/// Canonical JSON for a sweep result table.
std::string sweep_to_json(const std::vector<SweepCell>& cells, const Scenario& scenario);

}  // namespace rcp
