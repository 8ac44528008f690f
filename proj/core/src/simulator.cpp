#include "rcp/simulator.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace rcp {

namespace {
constexpr double kResolveLambda = 1e-6;  // damping for the least-squares correction
}

std::optional<std::pair<Eigen::Vector3d, Eigen::Vector3d>> fit_plane(
    std::span<const Configuration> window, const Eigen::Vector3d& toward) {
  if (window.empty()) {
    return std::nullopt;
  }
  const SpaceType space = window.front().space;
  const int dims = linear_dims(space);
  if (static_cast<int>(window.size()) < dims) {
    return std::nullopt;
  }
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const Configuration& q : window) {
    centroid += q.translation;
  }
  centroid /= static_cast<double>(window.size());

  Eigen::MatrixXd centered(window.size(), dims);
  for (std::size_t i = 0; i < window.size(); ++i) {
    for (int d = 0; d < dims; ++d) {
      centered(i, d) = window[i].translation[d] - centroid[d];
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullV);
  if (svd.singularValues()[0] < 1e-9) {
    return std::nullopt;  // coincident points; no direction of travel
  }
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  const Eigen::VectorXd v = svd.matrixV().col(dims - 1);
  for (int d = 0; d < dims; ++d) {
    normal[d] = v[d];
  }
  normal.normalize();
  if (normal.dot(toward - centroid) < 0.0) {
    normal = -normal;  // orient toward the commanded target's side
  }
  return std::make_pair(centroid, normal);
}

Simulator::Simulator(const VoxelEnvironment& env, const RobotModel& robot, SpaceMetric metric,
                     ControllerGains gains, NoiseModel noise, double convergence_tolerance,
                     double contact_tolerance, int max_resolve_iterations)
    : env_(env),
      robot_(robot),
      metric_(metric),
      gains_(gains),
      noise_(noise),
      convergence_tolerance_(convergence_tolerance),
      contact_tolerance_(contact_tolerance),
      max_resolve_iterations_(max_resolve_iterations),
      max_step_(0.99 * env.resolution()) {
  if (gains_.timestep <= 0.0 || convergence_tolerance_ <= 0.0) {
    throw std::invalid_argument("Simulator: timestep and tolerance must be positive");
  }
}

int Simulator::planner_step_budget() const {
  return static_cast<int>(std::lround(gains_.t_simulate / gains_.timestep));
}

int Simulator::exec_step_budget() const {
  return static_cast<int>(std::lround(gains_.t_exec / gains_.timestep));
}

Configuration Simulator::resolve_collisions(const Configuration& q, bool& ok,
                                            std::vector<double>* depth_trace) const {
  const int td = twist_dims(q.space);
  const int ld = linear_dims(q.space);
  Configuration cur = q;
  for (int iter = 0; iter < max_resolve_iterations_; ++iter) {
    std::vector<Contact> contacts = check_collision(env_, robot_, cur);
    double max_depth = 0.0;
    for (const Contact& c : contacts) {
      max_depth = std::max(max_depth, c.penetration_depth);
    }
    if (depth_trace) {
      depth_trace->push_back(max_depth);
    }
    if (max_depth <= contact_tolerance_) {
      ok = true;
      return cur;
    }
    Eigen::MatrixXd j(ld * static_cast<int>(contacts.size()), td);
    Eigen::VectorXd dp(ld * static_cast<int>(contacts.size()));
    for (std::size_t k = 0; k < contacts.size(); ++k) {
      const Contact& c = contacts[k];
      j.middleRows(ld * static_cast<int>(k), ld) = point_jacobian(robot_, cur, c.point_index);
      for (int d = 0; d < ld; ++d) {
        dp[ld * static_cast<int>(k) + d] = c.penetration_depth * c.surface_normal[d];
      }
    }
    // Damped least squares: (J^T J + lambda I) dq = J^T dp.
    Eigen::MatrixXd jtj = j.transpose() * j;
    jtj.diagonal().array() += kResolveLambda;
    Eigen::VectorXd dq = jtj.ldlt().solve(j.transpose() * dp);
    if (iter >= 25) {
      dq *= 0.5;  // damp late iterations against corner oscillation
    }
    Twist corr;
    corr.linear = Eigen::Vector3d(dq[0], dq[1], ld == 3 ? dq[2] : 0.0);
    if (q.space == SpaceType::SE2) {
      corr.angular = Eigen::Vector3d(0.0, 0.0, dq[2]);
    } else {
      corr.angular = Eigen::Vector3d(dq[3], dq[4], dq[5]);
    }
    cur = apply_twist(cur, corr);
  }
  ok = false;
  return cur;
}

Configuration Simulator::simulate_step(const Configuration& q, const Configuration& target,
                                       Twist& prev_error, bool& has_prev, bool noise_on,
                                       RandomStream& rng, bool* resolved_ok) const {
  const Twist e = twist_between(q, target);
  Twist de;
  if (has_prev) {
    de = (e - prev_error) * (1.0 / gains_.timestep);
  }
  prev_error = e;
  has_prev = true;

  Twist control = e * gains_.kp + de * gains_.kd;
  const double motion = control.linear_norm() + control.angular_norm() * robot_.bounding_radius;
  if (motion > max_step_) {
    control = control * (max_step_ / motion);
  }
  if (noise_on && !noise_.is_zero()) {
    // Velocity-space draw scaled by the timestep into a displacement.
    control = control + sample_noise(control, noise_, q.space, rng) * gains_.timestep;
  }
  const Configuration proposed = apply_twist(q, control);
  bool ok = true;
  const Configuration resolved = resolve_collisions(proposed, ok);
  if (resolved_ok) {
    *resolved_ok = ok;
  }
  return ok ? resolved : q;
}

SimResult Simulator::simulate_motion(const Configuration& start, const Configuration& target,
                                     RandomStream& rng, bool noise_on,
                                     int step_budget_override) const {
  SimResult result;
  result.trajectory.push_back(start);
  result.final = start;
  const int budget = step_budget_override > 0 ? step_budget_override : planner_step_budget();

  double best = distance(start, target, metric_);
  if (best <= convergence_tolerance_) {
    result.outcome = SimOutcome::Converged;
    return result;
  }
  Twist prev_error;
  bool has_prev = false;
  Configuration q = start;
  int stall = 0;
  for (int step = 1; step <= budget; ++step) {
    q = simulate_step(q, target, prev_error, has_prev, noise_on, rng);
    result.trajectory.push_back(q);
    result.steps = step;
    result.final = q;
    const double d = distance(q, target, metric_);
    if (d <= convergence_tolerance_) {
      result.outcome = SimOutcome::Converged;
      return result;
    }
    if (d < best - 1e-6) {
      best = d;
      stall = 0;
    } else if (++stall >= 25) {
      result.outcome = SimOutcome::CompletelyStuck;
      return result;
    }
  }
  result.outcome = SimOutcome::BudgetExhausted;
  return result;
}

SimResult Simulator::contact_motion_execute(const Configuration& start,
                                            const Configuration& target,
                                            const StuckDetector& detector, RandomStream& rng,
                                            bool noise_on) const {
  if (detector.window < 2 || detector.eps_adjust <= 0.0 || detector.eps_adjust > 1.0) {
    throw std::invalid_argument("contact_motion_execute: invalid stuck detector");
  }
  SimResult result;
  result.trajectory.push_back(start);
  result.final = start;
  if (distance(start, target, metric_) <= convergence_tolerance_) {
    result.outcome = SimOutcome::Converged;
    return result;
  }
  const int budget = exec_step_budget();
  Configuration q = start;
  Configuration current_target = target;
  Twist prev_error;
  bool has_prev = false;
  std::deque<Configuration> window;
  int stuck_count = 0;

  for (int step = 1; step <= budget; ++step) {
    q = simulate_step(q, current_target, prev_error, has_prev, noise_on, rng);
    result.trajectory.push_back(q);
    result.steps = step;
    result.final = q;
    // Convergence is always judged against the original commanded target.
    if (distance(q, target, metric_) <= convergence_tolerance_) {
      result.outcome = SimOutcome::Converged;
      return result;
    }
    window.push_back(q);
    if (static_cast<int>(window.size()) > detector.window) {
      window.pop_front();
    }
    if (static_cast<int>(window.size()) < detector.window) {
      continue;
    }
    double moved = 0.0;
    for (std::size_t i = 1; i < window.size(); ++i) {
      moved += distance(window[i - 1], window[i], metric_);
    }
    if (moved >= detector.eps_stuck) {
      if (stuck_count > 0) {
        stuck_count = 0;
        current_target = target;  // progress resumed; drop the adjustment
      }
      continue;
    }
    ++stuck_count;
    if (stuck_count * detector.eps_adjust >= 1.0) {
      result.outcome = SimOutcome::CompletelyStuck;
      return result;
    }
    std::vector<Configuration> win(window.begin(), window.end());
    auto plane = fit_plane(win, target.translation);
    if (!plane) {
      // Degenerate window: fall back to the current contact normal, if any.
      const auto contacts = check_collision(env_, robot_, q);
      if (contacts.empty()) {
        result.outcome = SimOutcome::CompletelyStuck;
        return result;
      }
      plane = std::make_pair(q.translation, contacts.front().surface_normal);
    }
    const Eigen::Vector3d& p = plane->first;
    const Eigen::Vector3d& n = plane->second;
    const Eigen::Vector3d t = target.translation;
    current_target = target;
    current_target.translation =
        t + ((p - t).dot(n)) * n * (static_cast<double>(stuck_count) * detector.eps_adjust);
    window.clear();  // give the new target a full window before re-checking
  }
  result.outcome = SimOutcome::BudgetExhausted;
  return result;
}

}  // namespace rcp
