#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "rcp/clustering.hpp"
#include "rcp/simulator.hpp"
#include "rcp/space.hpp"

namespace rcp {

/// Node of the belief tree: a particle belief reached by commanding `action`
/// from the parent node, with transition/reversal statistics.
struct PlannerNode {
  BeliefState belief;
  Configuration action;          ///< commanded target that produced this node
  std::uint64_t action_id = 0;   ///< shared by siblings of one extension; 0 = start
  int parent = -1;
  double p_transition = 1.0;     ///< P(parent -> node), cluster mass fraction
  double p_effective = 1.0;      ///< transition probability after reversal retries
  int reverse_attempts = 0;
  int reverse_successes = 0;
  double p_path = 1.0;           ///< product of p_effective along the root path
  bool is_split_result = false;

  // Cached statistics of the belief.
  Configuration expectation;
  double variance_l1 = 0.0;
};

struct PlannerParams {
  int n_particles = 24;
  double alpha_p = 0.75;       ///< path-probability weight in node proximity
  double alpha_v = 0.75;       ///< variance weight in node proximity
  double p_goal = 0.51;        ///< planning-time goal probability threshold
  double eps_goal = 0.1;       ///< goal tolerance (C-space metric units)
  int n_attempt = 50;          ///< reversal retry cap for effective probability
  double goal_bias = 0.1;      ///< probability of sampling the goal as target
  double t_planning = 120.0;   ///< wall-clock budget in seconds; <= 0 disables
  int max_iterations = 0;      ///< iteration budget; 0 disables. For exactly
                               ///< reproducible plans use this budget alone.
  int connect_cap = 32;        ///< safety limit on chained extensions per target
  double min_progress = 1e-6;  ///< expectation motion below this discards a node
};

struct PlannerStats {
  int iterations = 0;
  int extend_calls = 0;
  long long particles_simulated = 0;
  double wall_seconds = 0.0;
};

/// Belief tree plus every root-to-goal path found (anytime result).
struct SolutionSet {
  std::vector<PlannerNode> nodes;
  std::vector<std::vector<int>> solutions;  ///< node-index paths, root first
  std::set<int> nn_excluded;                ///< pruned from nearest-neighbor search
  std::uint64_t next_action_id = 1;
  std::uint64_t seed = 0;
  PlannerStats stats;
};

/// Probability that one of k attempts reaches the child, where a failed
/// attempt (probability 1-p) must reverse successfully (probability r)
/// to try again: reached(j) = reached(j-1) + at(j-1)*p, at(j) = at(j-1)*(1-p)*r.
double effective_probability(double p, double r, int k);

/// Distance-based node selection score: nodes with likely, low-variance
/// beliefs look closer. dist * [(1-p_path)*a_P + (1-a_P)] *
/// [erf(|var|_1)*a_V + (1-a_V)].
double proximity(const PlannerNode& n, const Configuration& q, const PlannerParams& params,
                 const SpaceMetric& metric);

/// True iff p_path * (fraction of belief within eps_goal of q_goal) >= p_goal.
bool check_goal(const PlannerNode& n, const Configuration& q_goal, const PlannerParams& params,
                const SpaceMetric& metric);

/// Excludes the terminal's branch from nearest-neighbor consideration,
/// walking toward the root and stopping at the root or the first
/// split-result node (the branch base, which stays available). Idempotent.
void prune_solution_branch(SolutionSet& s, int terminal);

/// Belief-space RRT: grows a tree of particle beliefs with a simulation
/// local planner, detecting action splits by clustering and estimating
/// reversibility for every new node.
class BeliefPlanner {
 public:
  BeliefPlanner(const ClusterEngine& engine, const SampleBounds& bounds, PlannerParams params);

  /// Anytime search from start toward goal. Runs until the iteration and/or
  /// wall-clock budget expires; returns every solution found (possibly none).
  /// Identical seeds with an iteration-only budget reproduce results exactly.
  /// Throws std::invalid_argument when start is in collision or no budget is
  /// configured.
  SolutionSet plan(const Configuration& start, const Configuration& goal, std::uint64_t seed);

  /// One local-planner extension from nodes[near_index] toward q_target:
  /// simulates a full particle set, clusters the outcomes into new nodes
  /// (several on a split), estimates each node's reversal probability, and
  /// appends them. Returns the new node indices; empty when nothing moved.
  std::vector<int> extend(SolutionSet& s, int near_index, const Configuration& q_target,
                          std::uint64_t extend_seed);

  /// Fraction of a full particle set that, rolled out from belief toward
  /// expect(parent belief), lands back in the parent belief's cluster.
  double estimate_reversibility(const BeliefState& belief, const BeliefState& parent_belief,
                                std::uint64_t seed, int* successes = nullptr);

  const PlannerParams& params() const { return params_; }

 private:
  int nearest_node(const SolutionSet& s, const Configuration& q) const;

  const ClusterEngine& engine_;
  const Simulator& sim_;
  SampleBounds bounds_;
  PlannerParams params_;
};

}  // namespace rcp
