#include "rcp/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rcp {

double effective_probability(double p, double r, int k) {
  if (p < 0.0 || p > 1.0 || r < 0.0 || r > 1.0 || k < 1) {
    throw std::invalid_argument("effective_probability: arguments out of range");
  }
  double reached = 0.0;
  double at = 1.0;
  for (int j = 0; j < k; ++j) {
    reached += at * p;
    at *= (1.0 - p) * r;
  }
  return reached;
}

double proximity(const PlannerNode& n, const Configuration& q, const PlannerParams& params,
                 const SpaceMetric& metric) {
  const double d = distance(n.expectation, q, metric);
  const double p_term = (1.0 - n.p_path) * params.alpha_p + (1.0 - params.alpha_p);
  const double v_term = std::erf(n.variance_l1) * params.alpha_v + (1.0 - params.alpha_v);
  return d * p_term * v_term;
}

bool check_goal(const PlannerNode& n, const Configuration& q_goal, const PlannerParams& params,
                const SpaceMetric& metric) {
  if (n.belief.empty()) {
    return false;
  }
  std::size_t inside = 0;
  for (const Configuration& q : n.belief) {
    if (distance(q, q_goal, metric) <= params.eps_goal) {
      ++inside;
    }
  }
  const double fraction = static_cast<double>(inside) / static_cast<double>(n.belief.size());
  return n.p_path * fraction >= params.p_goal;
}

void prune_solution_branch(SolutionSet& s, int terminal) {
  // Remove the solution branch from nearest-neighbor consideration: walk
  // from the terminal toward the root, stopping after the first node that
  // resulted from a split (the base of the branch — it is excluded too, so
  // repeated goal-biased samples cannot keep re-finding the same path; the
  // split's sibling subtrees and the shared trunk above remain available).
  int cur = terminal;
  while (cur > 0 && !s.nodes[cur].is_split_result) {
    s.nn_excluded.insert(cur);
    cur = s.nodes[cur].parent;
  }
}

BeliefPlanner::BeliefPlanner(const ClusterEngine& engine, const SampleBounds& bounds,
                             PlannerParams params)
    : engine_(engine), sim_(engine.simulator()), bounds_(bounds), params_(params) {
  if (params_.n_particles < 1) {
    throw std::invalid_argument("BeliefPlanner: n_particles must be >= 1");
  }
  if (params_.p_goal <= 0.0 || params_.p_goal > 1.0) {
    throw std::invalid_argument("BeliefPlanner: p_goal outside (0, 1]");
  }
}

double BeliefPlanner::estimate_reversibility(const BeliefState& belief,
                                             const BeliefState& parent_belief, std::uint64_t seed,
                                             int* successes) {
  const int n = params_.n_particles;
  const Configuration back_target = expect(parent_belief);
  RandomStream pick_rng(derive_seed(seed, 0));
  int ok = 0;
  for (int k = 0; k < n; ++k) {
    const Configuration& source = belief[pick_rng.uniform_index(belief.size())];
    RandomStream roll_rng(derive_seed(seed, 1 + static_cast<std::uint64_t>(k)));
    const SimResult res = sim_.simulate_motion(source, back_target, roll_rng);
    if (engine_.matches_belief(parent_belief, res.final)) {
      ++ok;
    }
  }
  if (successes) {
    *successes = ok;
  }
  return static_cast<double>(ok) / static_cast<double>(n);
}

std::vector<int> BeliefPlanner::extend(SolutionSet& s, int near_index,
                                       const Configuration& q_target,
                                       std::uint64_t extend_seed) {
  const int n = params_.n_particles;
  // Copy what we need: node references go stale as the tree grows.
  const BeliefState near_belief = s.nodes[near_index].belief;
  const Configuration near_expect = s.nodes[near_index].expectation;
  const bool resample = s.nodes[near_index].is_split_result ||
                        static_cast<int>(near_belief.size()) != n;
  const double near_p_path = s.nodes[near_index].p_path;

  BeliefState sources;
  sources.reserve(n);
  if (resample) {
    RandomStream pick_rng(derive_seed(extend_seed, 0));
    for (int i = 0; i < n; ++i) {
      sources.push_back(near_belief[pick_rng.uniform_index(near_belief.size())]);
    }
  } else {
    sources = near_belief;
  }

  BeliefState results;
  results.reserve(n);
  for (int i = 0; i < n; ++i) {
    RandomStream roll_rng(derive_seed(extend_seed, 100 + static_cast<std::uint64_t>(i)));
    results.push_back(sim_.simulate_motion(sources[i], q_target, roll_rng).final);
  }
  s.stats.extend_calls += 1;
  s.stats.particles_simulated += n;

  const std::vector<std::vector<int>> clusters = engine_.cluster_particles(results);
  const std::uint64_t action_id = s.next_action_id++;
  const bool split = clusters.size() > 1;

  std::vector<int> added;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    PlannerNode node;
    node.belief.reserve(clusters[c].size());
    for (int idx : clusters[c]) {
      node.belief.push_back(results[idx]);
    }
    node.expectation = expect(node.belief);
    if (distance(node.expectation, near_expect, sim_.metric()) < params_.min_progress) {
      continue;  // no net motion; a self-loop node would stall the search
    }
    node.action = q_target;
    node.action_id = action_id;
    node.parent = near_index;
    node.p_transition =
        static_cast<double>(clusters[c].size()) / static_cast<double>(n);
    node.is_split_result = split;
    node.variance_l1 = variance_l1(node.belief);

    int rev_ok = 0;
    estimate_reversibility(node.belief, near_belief,
                           derive_seed(extend_seed, 1000 + static_cast<std::uint64_t>(c)),
                           &rev_ok);
    s.stats.particles_simulated += n;
    node.reverse_attempts = n;
    node.reverse_successes = rev_ok;
    const double r = static_cast<double>(rev_ok) / static_cast<double>(n);
    node.p_effective = effective_probability(node.p_transition, r, params_.n_attempt);
    // Path success chains the retry-aware probability: during execution a
    // wrong outcome is reversed and the action retried up to n_attempt times,
    // so the chance of traversing the whole path is the product of effective
    // (not raw single-shot) transition probabilities.
    node.p_path = near_p_path * node.p_effective;

    s.nodes.push_back(std::move(node));
    added.push_back(static_cast<int>(s.nodes.size()) - 1);
  }
  return added;
}

int BeliefPlanner::nearest_node(const SolutionSet& s, const Configuration& q) const {
  int best = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(s.nodes.size()); ++i) {
    if (s.nn_excluded.count(i)) {
      continue;
    }
    const double score = proximity(s.nodes[i], q, params_, sim_.metric());
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

SolutionSet BeliefPlanner::plan(const Configuration& start, const Configuration& goal,
                                std::uint64_t seed) {
  if (params_.t_planning <= 0.0 && params_.max_iterations <= 0) {
    throw std::invalid_argument("plan: no planning budget configured");
  }
  if (!check_collision(sim_.environment(), sim_.robot(), start).empty()) {
    throw std::invalid_argument("plan: start configuration is in collision");
  }

  SolutionSet s;
  s.seed = seed;
  PlannerNode root;
  root.belief.assign(params_.n_particles, start);
  root.action = start;
  root.action_id = 0;
  root.expectation = start;
  root.variance_l1 = 0.0;
  s.nodes.push_back(std::move(root));

  RandomStream master(derive_seed(seed, 0));
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  while (true) {
    if (params_.max_iterations > 0 && s.stats.iterations >= params_.max_iterations) {
      break;
    }
    if (params_.t_planning > 0.0 && elapsed() >= params_.t_planning) {
      break;
    }
    s.stats.iterations += 1;

    const bool to_goal = master.uniform01() < params_.goal_bias;
    const Configuration target = to_goal ? goal : sample_uniform(bounds_, master);
    int near = nearest_node(s, target);
    if (near < 0) {
      break;  // cannot happen: the root is never excluded
    }

    // Connect-style chaining until the first solution exists, then single
    // extensions for coverage. Splits, stalls, and extensions that stop
    // closing on the target (trapped against an obstacle) end the chain.
    const bool connect = s.solutions.empty();
    double best_gap = distance(s.nodes[near].expectation, target, sim_.metric());
    for (int rep = 0; rep < (connect ? params_.connect_cap : 1); ++rep) {
      const std::vector<int> added = extend(s, near, target, master.next_u64());
      if (added.empty()) {
        break;
      }
      bool found_solution = false;
      for (int idx : added) {
        if (check_goal(s.nodes[idx], goal, params_, sim_.metric())) {
          std::vector<int> path;
          for (int cur = idx; cur >= 0; cur = s.nodes[cur].parent) {
            path.push_back(cur);
          }
          std::reverse(path.begin(), path.end());
          s.solutions.push_back(std::move(path));
          prune_solution_branch(s, idx);
          found_solution = true;
        }
      }
      if (found_solution || added.size() > 1) {
        break;
      }
      const int child = added.front();
      const double gap = distance(s.nodes[child].expectation, target, sim_.metric());
      if (gap <= params_.eps_goal) {
        break;  // target reached
      }
      if (gap >= best_gap - params_.min_progress) {
        break;  // trapped: no progress toward the target
      }
      best_gap = gap;
      near = child;
    }
  }
  s.stats.wall_seconds = elapsed();
  return s;
}

}  // namespace rcp
