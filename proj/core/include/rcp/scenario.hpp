#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcp/clustering.hpp"
#include "rcp/environment.hpp"
#include "rcp/planner.hpp"
#include "rcp/policy.hpp"
#include "rcp/simulator.hpp"
#include "rcp/space.hpp"

namespace rcp {

/// Scenario-file validation failure; the message names the offending field.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A fully validated experiment description: workspace, robot, task, noise
/// level and all algorithm parameters. extra_obstacles and blockers exist
/// only in the execution-time environment (unmodeled by the planner), which
/// is how blocked-passage experiments are expressed.
struct Scenario {
  /// Execution-only obstacle tied to a passage region: activated when that
  /// region is selected for blocking.
  struct Blocker {
    std::uint32_t region = 0;
    Box box;
  };

  std::string name;
  SpaceType space = SpaceType::SE2;

  Box bounds;
  double resolution = 0.02;
  std::vector<Box> obstacles;
  std::vector<RegionBox> regions;
  std::vector<std::string> region_names;        ///< parallel to regions
  std::vector<Box> extra_obstacles;             ///< unconditional execution-only additions
  std::vector<Blocker> blockers;                ///< per-region execution-only additions
  std::vector<std::uint32_t> passage_regions;   ///< region ids counted as passages

  RobotModel robot;
  Configuration start;
  Configuration goal;
  double eps_goal = 0.1;
  SpaceMetric metric;
  NoiseModel noise;
  ControllerGains gains;
  StuckDetector detector;
  PlannerParams planner;
  ClusteringConfig clustering;
  AdaptationConfig adaptation;
  SampleBounds sampling;

  /// Environment the planner and policy matching see (regions validated
  /// obstacle-free).
  VoxelEnvironment planning_environment() const;
  /// Environment executions run against: obstacles, extra_obstacles, and the
  /// blockers of every region in `blocked_regions`. Regions are carried over
  /// without the overlap validation, since the added obstacles may
  /// deliberately block a region.
  VoxelEnvironment execution_environment(
      const std::set<std::uint32_t>& blocked_regions = {}) const;
};

/// Parses and validates a scenario document. Throws ScenarioError with the
/// offending field's path on schema violations, and for semantic errors
/// (start in collision, goal out of bounds, bad parameter ranges).
Scenario parse_scenario(const std::string& json_text);

/// parse_scenario over a file's contents.
Scenario load_scenario(const std::string& path);

}  // namespace rcp
