#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rcp/environment.hpp"
#include "rcp/space.hpp"

namespace rcp {

/// Proportional-derivative tracking gains and timing for the kinematic
/// simulation. t_simulate bounds planner rollouts; t_exec bounds execution
/// rollouts (both in simulated seconds).
struct ControllerGains {
  double kp = 1.0;
  double kd = 0.05;
  double timestep = 0.02;   ///< seconds per simulation step
  double t_simulate = 4.0;  ///< planner rollout budget
  double t_exec = 8.0;      ///< execution rollout budget
};

/// Sliding-window progress monitor for the contact-aware controller.
struct StuckDetector {
  int window = 8;            ///< trajectory window length, >= 2
  double eps_stuck = 0.02;   ///< minimum summed window motion (meters)
  double eps_adjust = 0.01;  ///< per-adjustment step size along the plane normal
};

enum class SimOutcome { Converged, BudgetExhausted, CompletelyStuck };

struct SimResult {
  Configuration final;
  std::vector<Configuration> trajectory;  ///< includes the start configuration
  SimOutcome outcome = SimOutcome::BudgetExhausted;
  int steps = 0;
};

/// Fits a plane (point, unit normal) to the window of recent configurations
/// via SVD of the centered translations, with the normal oriented toward the
/// side of `toward`. SE(2) fits a line in the plane. Returns nothing when the
/// window is too short or the points are degenerate (coincident).
std::optional<std::pair<Eigen::Vector3d, Eigen::Vector3d>> fit_plane(
    std::span<const Configuration> window, const Eigen::Vector3d& toward);

/// Contact-aware kinematic simulator over a voxelized workspace. Steps are
/// pure given the RNG stream, so particles with independently derived seeds
/// can be rolled out in any order (or concurrently) with identical results.
class Simulator {
 public:
  Simulator(const VoxelEnvironment& env, const RobotModel& robot, SpaceMetric metric,
            ControllerGains gains, NoiseModel noise, double convergence_tolerance,
            double contact_tolerance = 1e-6, int max_resolve_iterations = 50);

  /// Pushes a colliding configuration out of penetration by iterating
  /// damped least-squares corrections stacked over all contact points.
  /// Sets ok = false when contact_tolerance is not reached within the
  /// iteration budget. Optionally records the max penetration depth seen
  /// at the start of each iteration.
  Configuration resolve_collisions(const Configuration& q, bool& ok,
                                   std::vector<double>* depth_trace = nullptr) const;

  /// One PD step toward target with optional actuation noise; workspace
  /// motion is clamped below one voxel per step, and steps whose penetration
  /// cannot be resolved revert to q. prev_error/has_prev carry PD state.
  Configuration simulate_step(const Configuration& q, const Configuration& target,
                              Twist& prev_error, bool& has_prev, bool noise_on, RandomStream& rng,
                              bool* resolved_ok = nullptr) const;

  /// Planner rollout: PD steps until convergence, the step budget runs out,
  /// or the distance to target stalls (< 1e-6 improvement over 25 steps).
  SimResult simulate_motion(const Configuration& start, const Configuration& target,
                            RandomStream& rng, bool noise_on = true,
                            int step_budget_override = -1) const;

  /// Execution rollout with stuck recovery: when a window of recent motion
  /// falls below eps_stuck, fits a contact plane and retargets toward the
  /// projection of the target onto it, backing off further on each repeat;
  /// declares CompletelyStuck once the accumulated adjustment reaches 1.
  SimResult contact_motion_execute(const Configuration& start, const Configuration& target,
                                   const StuckDetector& detector, RandomStream& rng,
                                   bool noise_on = true) const;

  const VoxelEnvironment& environment() const { return env_; }
  const RobotModel& robot() const { return robot_; }
  const ControllerGains& gains() const { return gains_; }
  const NoiseModel& noise() const { return noise_; }
  const SpaceMetric& metric() const { return metric_; }
  double convergence_tolerance() const { return convergence_tolerance_; }
  int planner_step_budget() const;
  int exec_step_budget() const;

 private:
  const VoxelEnvironment& env_;
  const RobotModel& robot_;
  SpaceMetric metric_;
  ControllerGains gains_;
  NoiseModel noise_;
  double convergence_tolerance_;
  double contact_tolerance_;
  int max_resolve_iterations_;
  double max_step_;  ///< workspace motion clamp, 0.99 * voxel resolution
};

}  // namespace rcp
