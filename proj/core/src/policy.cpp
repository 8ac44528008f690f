#include "rcp/policy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <stdexcept>

namespace rcp {

namespace {
constexpr std::uint64_t kReverseIdBase = 1ULL << 63;
}

int attempts_estimate(double p, double r, double p_goal, int cap, bool* capped) {
  if (p <= 0.0 || p > 1.0 || r < 0.0 || r > 1.0 || cap < 1) {
    throw std::invalid_argument("attempts_estimate: arguments out of range");
  }
  double reached = 0.0;
  double at = 1.0;
  for (int k = 1; k <= cap; ++k) {
    reached += at * p;
    at *= (1.0 - p) * r;
    if (reached >= p_goal - 1e-12) {
      if (capped) {
        *capped = false;
      }
      return k;
    }
  }
  if (capped) {
    *capped = true;
  }
  return cap;
}

void Policy::increase_probability(Edge& e, const AdaptationConfig& cfg) {
  e.n_attempts += cfg.a_importance;
  e.n_successful += cfg.a_importance;
}

void Policy::reduce_probability(Edge& e, const AdaptationConfig& cfg) {
  e.n_attempts += cfg.a_importance;
}

Policy::Policy(const SolutionSet& s, const Configuration& q_goal, const PlannerParams& params,
               AdaptationConfig cfg, const ClusterEngine& engine)
    : cfg_(cfg), engine_(engine) {
  if (s.solutions.empty()) {
    throw std::invalid_argument("Policy: solution set has no goal-reaching path");
  }
  if (cfg_.a_importance < 1.0) {
    throw std::invalid_argument("Policy: a_importance must be >= 1");
  }

  // Vertices: distinct solution-path nodes in ascending node order.
  std::map<int, int> vertex_of_node;
  for (const std::vector<int>& path : s.solutions) {
    for (int node : path) {
      vertex_of_node.emplace(node, -1);
    }
  }
  vertices_.reserve(vertex_of_node.size());
  for (auto& [node, slot] : vertex_of_node) {
    slot = static_cast<int>(vertices_.size());
    const PlannerNode& n = s.nodes[node];
    Vertex v;
    v.belief = n.belief;
    v.action_id = n.action_id;
    v.action = n.action;
    v.planner_node = node;
    vertices_.push_back(std::move(v));
  }
  start_vertex_ = vertex_of_node.count(0) ? vertex_of_node[0] : 0;
  for (const std::vector<int>& path : s.solutions) {
    const int terminal = path.back();
    if (check_goal(s.nodes[terminal], q_goal, params, engine_.simulator().metric())) {
      vertices_[vertex_of_node[terminal]].is_goal = true;
    }
  }

  // Forward edges carry the planner's transition counts; each gets a paired
  // reverse edge carrying the reversal counts observed for the child node.
  std::map<std::pair<int, int>, int> edge_of;
  for (const std::vector<int>& path : s.solutions) {
    for (std::size_t i = 1; i < path.size(); ++i) {
      const int parent = path[i - 1];
      const int child = path[i];
      if (edge_of.count({parent, child})) {
        continue;
      }
      const PlannerNode& cn = s.nodes[child];
      const int u = vertex_of_node[parent];
      const int v = vertex_of_node[child];

      Edge fwd;
      fwd.from = u;
      fwd.to = v;
      fwd.action_id = cn.action_id;
      fwd.target = cn.action;
      fwd.n_attempts = static_cast<double>(params.n_particles);
      fwd.n_successful = cn.p_transition * static_cast<double>(params.n_particles);
      const int fwd_idx = static_cast<int>(edges_.size());
      edges_.push_back(fwd);
      edge_of[{parent, child}] = fwd_idx;

      Edge rev;
      rev.from = v;
      rev.to = u;
      rev.action_id = kReverseIdBase + next_reverse_id_++;
      rev.target = expect(s.nodes[parent].belief);
      rev.n_attempts = static_cast<double>(cn.reverse_attempts);
      rev.n_successful = static_cast<double>(cn.reverse_successes);
      rev.is_reverse = true;
      rev.pair = fwd_idx;
      const int rev_idx = static_cast<int>(edges_.size());
      edges_.push_back(rev);
      edges_[fwd_idx].pair = rev_idx;

      vertices_[u].out_edges.push_back(fwd_idx);
      vertices_[v].in_edges.push_back(fwd_idx);
      vertices_[v].out_edges.push_back(rev_idx);
      vertices_[u].in_edges.push_back(rev_idx);
    }
  }

  bool any_goal = false;
  for (const Vertex& v : vertices_) {
    any_goal |= v.is_goal;
  }
  if (!any_goal) {
    throw std::invalid_argument("Policy: no vertex passes the goal check");
  }
  rebuild();
}

void Policy::rebuild() {
  for (Edge& e : edges_) {
    const double p = e.probability();
    if (p <= 0.0) {
      e.cost = std::numeric_limits<double>::infinity();
      e.attempts = 0;
      e.capped = false;
      continue;
    }
    const double r = e.pair >= 0 ? edges_[e.pair].probability() : 0.0;
    e.attempts = attempts_estimate(p, r, cfg_.p_goal, cfg_.attempt_cap, &e.capped);
    e.cost = (1.0 / p) * static_cast<double>(e.attempts) * (e.capped ? cfg_.capped_penalty : 1.0);
  }

  const double inf = std::numeric_limits<double>::infinity();
  for (Vertex& v : vertices_) {
    v.dijkstra_distance = v.is_goal ? 0.0 : inf;
    v.best_edge = -1;
  }
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> queue;
  for (int i = 0; i < static_cast<int>(vertices_.size()); ++i) {
    if (vertices_[i].is_goal) {
      queue.push({0.0, i});
    }
  }
  while (!queue.empty()) {
    const auto [d, v] = queue.top();
    queue.pop();
    if (d > vertices_[v].dijkstra_distance) {
      continue;
    }
    // Relax edges u -> v backwards: a shorter route to the goal through v.
    for (int e_idx : vertices_[v].in_edges) {
      const Edge& e = edges_[e_idx];
      if (!std::isfinite(e.cost)) {
        continue;
      }
      const int u = e.from;
      const double candidate = d + e.cost;
      if (candidate < vertices_[u].dijkstra_distance) {
        vertices_[u].dijkstra_distance = candidate;
        vertices_[u].best_edge = e_idx;
        queue.push({candidate, u});
      }
    }
  }
}

double Policy::route_goal_probability(int vertex) const {
  if (vertex < 0 || vertex >= static_cast<int>(vertices_.size())) {
    return 0.0;
  }
  double product = 1.0;
  int cur = vertex;
  // Best-edge chains strictly decrease dijkstra_distance, so this terminates.
  while (!vertices_[cur].is_goal) {
    const int e_idx = vertices_[cur].best_edge;
    if (e_idx < 0 || !std::isfinite(vertices_[cur].dijkstra_distance)) {
      return 0.0;
    }
    product *= edges_[e_idx].probability();
    cur = edges_[e_idx].to;
  }
  return product;
}

std::vector<int> Policy::potential_vertices(std::uint64_t a_performed) const {
  std::vector<int> out;
  if (a_performed == 0) {
    out.push_back(start_vertex_);
    return out;
  }
  // Potential outcomes of the performed action: the targets of its edges
  // (planned siblings share the action id; observed vertices join later).
  for (const Edge& e : edges_) {
    if (e.action_id == a_performed) {
      out.push_back(e.to);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int Policy::insert_observed(const Configuration& q_current, std::uint64_t a_performed,
                            int previous_vertex) {
  Vertex v;
  v.belief = {q_current};
  v.action_id = a_performed;
  v.observed = true;
  v.action = q_current;
  for (const Edge& e : edges_) {
    if (e.action_id == a_performed) {
      v.action = e.target;  // the commanded configuration of that action
      break;
    }
  }
  const int v_idx = static_cast<int>(vertices_.size());
  vertices_.push_back(std::move(v));
  ++observed_insertions_;

  // The forward edge records the single observed occurrence of this outcome;
  // the reverse edge toward the previous vertex starts optimistic (1/1) and
  // is weakened by the usual reduction when reversing fails.
  Edge fwd;
  fwd.from = previous_vertex;
  fwd.to = v_idx;
  fwd.action_id = a_performed;
  fwd.target = vertices_[v_idx].action;
  fwd.n_attempts = 1.0;
  fwd.n_successful = 1.0;
  const int fwd_idx = static_cast<int>(edges_.size());
  edges_.push_back(fwd);

  Edge rev;
  rev.from = v_idx;
  rev.to = previous_vertex;
  rev.action_id = kReverseIdBase + next_reverse_id_++;
  rev.target = expect(vertices_[previous_vertex].belief);
  rev.n_attempts = 1.0;
  rev.n_successful = 1.0;
  rev.is_reverse = true;
  rev.pair = fwd_idx;
  const int rev_idx = static_cast<int>(edges_.size());
  edges_.push_back(rev);
  edges_[fwd_idx].pair = rev_idx;

  vertices_[previous_vertex].out_edges.push_back(fwd_idx);
  vertices_[v_idx].in_edges.push_back(fwd_idx);
  vertices_[v_idx].out_edges.push_back(rev_idx);
  vertices_[previous_vertex].in_edges.push_back(rev_idx);
  rebuild();
  return v_idx;
}

Policy::QueryResult Policy::query(const Configuration& q_current, std::uint64_t a_performed,
                                  int previous_vertex, int action_index,
                                  std::vector<EventRecord>* events) {
  const std::vector<int> potential = potential_vertices(a_performed);

  int reached = -1;
  double reached_dist = std::numeric_limits<double>::infinity();
  for (int v : potential) {
    if (!engine_.matches_belief(vertices_[v].belief, q_current)) {
      continue;
    }
    // Ties break toward the smaller Dijkstra distance, then the lower index.
    if (reached < 0 || vertices_[v].dijkstra_distance < reached_dist) {
      reached = v;
      reached_dist = vertices_[v].dijkstra_distance;
    }
  }

  if (reached < 0) {
    if (previous_vertex < 0) {
      throw std::invalid_argument("policy query: start configuration matches no vertex");
    }
    const int inserted = insert_observed(q_current, a_performed, previous_vertex);
    if (events) {
      events->push_back({action_index, "insert_observed", previous_vertex, inserted,
                         edges_[vertices_[inserted].in_edges.front()].probability()});
    }
    return query(q_current, a_performed, previous_vertex, action_index, events);
  }

  if (previous_vertex >= 0) {
    bool updated = false;
    for (int e_idx = 0; e_idx < static_cast<int>(edges_.size()); ++e_idx) {
      Edge& e = edges_[e_idx];
      if (e.action_id != a_performed) {
        continue;
      }
      if (e.to == reached && e.from == previous_vertex) {
        increase_probability(e, cfg_);
        updated = true;
        if (events) {
          events->push_back({action_index, "increase", e.from, e.to, e.probability()});
        }
      } else {
        reduce_probability(e, cfg_);
        updated = true;
        if (events) {
          events->push_back({action_index, "reduce", e.from, e.to, e.probability()});
        }
      }
    }
    if (updated) {
      rebuild();
    }
  }

  QueryResult qr;
  qr.matched_vertex = reached;
  qr.route_probability = route_goal_probability(reached);
  if (qr.route_probability < cfg_.p_goal) {
    qr.failure = true;
    if (events) {
      events->push_back({action_index, "query_failure", reached, -1, qr.route_probability});
    }
    return qr;
  }
  const Vertex& rv = vertices_[reached];
  if (rv.best_edge >= 0) {
    const Edge& e = edges_[rv.best_edge];
    qr.action_id = e.action_id;
    qr.target = e.target;
    qr.via_edge = rv.best_edge;
  } else {
    // Matched a goal vertex while outside the goal tolerance: reissue the
    // action that produced it and let the executor close the gap.
    qr.action_id = rv.action_id;
    qr.target = rv.action;
    qr.via_edge = -1;
  }
  return qr;
}

std::string to_string(ExecutionResult::Outcome o) {
  switch (o) {
    case ExecutionResult::Outcome::Success:
      return "success";
    case ExecutionResult::Outcome::Failure:
      return "failure";
    case ExecutionResult::Outcome::Timeout:
      return "timeout";
  }
  return "timeout";
}

ExecutionResult execute_policy(Policy& policy, const Simulator& executor,
                               const StuckDetector& detector, const Configuration& start,
                               const Configuration& goal, double eps_goal,
                               double sim_budget_seconds, int max_actions, std::uint64_t seed) {
  ExecutionResult result;
  const int observed_before = policy.observed_insertions();
  Configuration q = start;
  std::uint64_t performed = 0;  // start marker
  int previous_vertex = -1;
  double sim_seconds = 0.0;
  int action = 0;
  result.trajectory.push_back(start);

  while (true) {
    if (distance(q, goal, executor.metric()) <= eps_goal) {
      result.outcome = ExecutionResult::Outcome::Success;
      break;
    }
    if ((sim_budget_seconds > 0.0 && sim_seconds >= sim_budget_seconds) ||
        action >= max_actions) {
      result.outcome = ExecutionResult::Outcome::Timeout;
      break;
    }
    const Policy::QueryResult qr =
        policy.query(q, performed, previous_vertex, action, &result.event_log);
    if (qr.failure) {
      result.outcome = ExecutionResult::Outcome::Failure;
      break;
    }
    RandomStream rng(derive_seed(seed, static_cast<std::uint64_t>(action)));
    const SimResult sr = executor.contact_motion_execute(q, qr.target, detector, rng);
    // Zero-step (already converged) actions still consume one step of budget
    // so that retry loops cannot stall the clock.
    sim_seconds += std::max(1, sr.steps) * executor.gains().timestep;

    ActionRecord rec;
    rec.index = action;
    rec.matched_vertex = qr.matched_vertex;
    rec.action_id = qr.action_id;
    rec.target = qr.target;
    rec.result = sr.final;
    rec.sim_steps = sr.steps;
    rec.sim_outcome = sr.outcome == SimOutcome::Converged        ? "converged"
                      : sr.outcome == SimOutcome::BudgetExhausted ? "budget_exhausted"
                                                                  : "completely_stuck";
    rec.route_probability = qr.route_probability;
    result.action_log.push_back(rec);
    result.trajectory.insert(result.trajectory.end(), sr.trajectory.begin() + 1,
                             sr.trajectory.end());
    result.actions += 1;
    ++action;

    q = sr.final;
    performed = qr.action_id;
    previous_vertex = qr.matched_vertex;
  }
  result.sim_seconds = sim_seconds;
  result.observed_insertions = policy.observed_insertions() - observed_before;
  return result;
}

}  // namespace rcp
