#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rcp/clustering.hpp"
#include "rcp/planner.hpp"

namespace rcp {

struct AdaptationConfig {
  double a_importance = 500.0;   ///< execution-evidence weight for count updates
  double p_goal = 0.51;          ///< execution-time routing threshold
  int attempt_cap = 50;          ///< cap for per-edge attempt estimation
  double capped_penalty = 1e6;   ///< cost multiplier for capped edges
};

/// Smallest attempt count k with effective_probability(p, r, k) >= p_goal
/// (with a 1e-12 slack to absorb rounding at the threshold). Returns cap and
/// sets *capped when no k <= cap suffices. p must be positive.
int attempts_estimate(double p, double r, double p_goal, int cap, bool* capped = nullptr);

/// Routing graph over the solution paths: one vertex per distinct solution
/// node plus any observed vertices inserted during execution; forward edges
/// carry the planner's transition counts, reverse edges the reversal counts.
/// Edge costs are attempt-weighted and routed by Dijkstra toward the goal set.
class Policy {
 public:
  struct Vertex {
    BeliefState belief;
    std::uint64_t action_id = 0;  ///< action that produces this vertex (0 = start)
    Configuration action;         ///< commanded configuration of that action
    int planner_node = -1;        ///< source node index; -1 for observed vertices
    bool is_goal = false;
    bool observed = false;
    std::vector<int> out_edges;
    std::vector<int> in_edges;
    // Derived by rebuild():
    double dijkstra_distance = std::numeric_limits<double>::infinity();
    int best_edge = -1;  ///< first edge of the optimal route to the goal set
  };

  struct Edge {
    int from = -1;
    int to = -1;
    std::uint64_t action_id = 0;
    Configuration target;     ///< configuration commanded when taking this edge
    double n_attempts = 0.0;
    double n_successful = 0.0;
    int pair = -1;            ///< index of the opposite-direction edge, if any
    bool is_reverse = false;
    // Derived by rebuild():
    double cost = std::numeric_limits<double>::infinity();
    int attempts = 0;
    bool capped = false;

    double probability() const { return n_attempts > 0.0 ? n_successful / n_attempts : 0.0; }
  };

  /// Structured record of one policy decision or adaptation event.
  struct EventRecord {
    int action_index = -1;
    std::string kind;  ///< increase | reduce | insert_observed | query_failure
    int edge_from = -1;
    int edge_to = -1;
    double probability = 0.0;  ///< edge probability after the update
  };

  struct QueryResult {
    bool failure = false;
    int matched_vertex = -1;
    std::uint64_t action_id = 0;
    Configuration target;
    double route_probability = 0.0;
    int via_edge = -1;
  };

  /// Builds the graph from the planner's solution paths. Throws
  /// std::invalid_argument when the solution set has no goal-reaching path.
  Policy(const SolutionSet& s, const Configuration& q_goal, const PlannerParams& params,
         AdaptationConfig cfg, const ClusterEngine& engine);

  /// Recomputes edge costs and the Dijkstra routing (idempotent on
  /// unchanged counts).
  void rebuild();

  /// One routing decision: match q_current against the possible outcomes of
  /// a_performed via the single-cluster test, reinforce the matched incoming
  /// edge and weaken the alternatives, then return the next action along the
  /// optimal route — or failure when the matched vertex's route probability
  /// falls below the threshold. Unmatched configurations insert an observed
  /// vertex (whose route reverses toward the previous vertex) and re-query.
  QueryResult query(const Configuration& q_current, std::uint64_t a_performed,
                    int previous_vertex, int action_index,
                    std::vector<EventRecord>* events = nullptr);

  /// Product of edge probabilities along the optimal route to the goal set;
  /// 0 when unrouted, 1 for goal vertices.
  double route_goal_probability(int vertex) const;

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int start_vertex() const { return start_vertex_; }
  int observed_insertions() const { return observed_insertions_; }
  const AdaptationConfig& config() const { return cfg_; }

  /// Eq.-style count updates: a success adds importance weight to both
  /// counters, a failure only to the attempt counter.
  static void increase_probability(Edge& e, const AdaptationConfig& cfg);
  static void reduce_probability(Edge& e, const AdaptationConfig& cfg);

 private:
  int insert_observed(const Configuration& q_current, std::uint64_t a_performed,
                      int previous_vertex);
  std::vector<int> potential_vertices(std::uint64_t a_performed) const;

  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  AdaptationConfig cfg_;
  const ClusterEngine& engine_;
  int start_vertex_ = 0;
  int observed_insertions_ = 0;
  std::uint64_t next_reverse_id_ = 0;
};

struct ActionRecord {
  int index = 0;
  int matched_vertex = -1;
  std::uint64_t action_id = 0;
  Configuration target;
  Configuration result;
  int sim_steps = 0;
  std::string sim_outcome;
  double route_probability = 0.0;
};

struct ExecutionResult {
  enum class Outcome { Success, Failure, Timeout };
  Outcome outcome = Outcome::Timeout;
  int actions = 0;
  double sim_seconds = 0.0;
  int observed_insertions = 0;
  std::vector<ActionRecord> action_log;
  std::vector<Policy::EventRecord> event_log;
  std::vector<Configuration> trajectory;  ///< every simulated configuration, in order
};

std::string to_string(ExecutionResult::Outcome o);

/// Closed-loop policy execution: query the policy, run the returned action
/// through the executor's stuck-recovering controller with injected noise,
/// feed the outcome back, and repeat until the goal tolerance is met, the
/// policy reports failure, or the simulated-time budget runs out. The policy
/// object keeps its adapted counts and observed vertices afterwards.
ExecutionResult execute_policy(Policy& policy, const Simulator& executor,
                               const StuckDetector& detector, const Configuration& start,
                               const Configuration& goal, double eps_goal,
                               double sim_budget_seconds, int max_actions, std::uint64_t seed);

}  // namespace rcp
