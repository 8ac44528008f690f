#pragma once

#include <span>
#include <string>
#include <vector>

#include "rcp/simulator.hpp"

namespace rcp {

/// Dense symmetric pairwise-distance matrix with a zero diagonal.
struct DistanceMatrix {
  int n = 0;
  std::vector<double> entries;  ///< row-major n*n

  static DistanceMatrix create(int n);
  double at(int i, int j) const { return entries[static_cast<std::size_t>(i) * n + j]; }
  void set(int i, int j, double v) {
    entries[static_cast<std::size_t>(i) * n + j] = v;
    entries[static_cast<std::size_t>(j) * n + i] = v;
  }
};

/// Agglomerative complete-link clustering: repeatedly merges the pair of
/// clusters with the smallest complete-link (max pairwise) distance until
/// that minimum exceeds the threshold. Equal-distance candidates merge in
/// order of (smaller min item index, then the other min index), so the
/// partition is deterministic and independent of input permutation.
/// Returned clusters hold ascending item indices and are ordered by their
/// first item.
std::vector<std::vector<int>> complete_link_cluster(const DistanceMatrix& dm, double threshold);

/// First-pass particle distance family.
enum class ClusterMethod {
  PairwiseSim,    ///< 0/1: bidirectional zero-noise simulation succeeds both ways
  RegionOverlap,  ///< fraction of robot points sharing no workspace region
  CenterSweep,    ///< 0/1: straight actuation-center sweeps stay collision-free
};

std::string to_string(ClusterMethod m);
ClusterMethod cluster_method_from_string(const std::string& s);

struct ClusteringConfig {
  ClusterMethod method = ClusterMethod::RegionOverlap;
  double region_threshold = 0.75;  ///< merge limit on region-overlap distance, in [0,1]
  double refine_threshold = 0.0;   ///< second-pass C-space limit; <= 0 selects 2 * eps_goal
};

/// Two-pass split detector over particle sets: a spatial-feature pass chosen
/// by method, then a complete-link refinement on C-space distance inside each
/// first-pass cluster. Also provides the single-cluster membership test used
/// when matching observed configurations against stored beliefs.
class ClusterEngine {
 public:
  /// The simulator supplies the environment, robot, metric and rollout
  /// budgets; pairwise simulations run noise-free at a quarter budget.
  ClusterEngine(const Simulator& sim, ClusteringConfig cfg, double eps_goal);

  /// 0 iff zero-noise rollouts q1->q2 and q2->q1 both end within eps_goal.
  int pairwise_sim_distance(const Configuration& q1, const Configuration& q2) const;
  /// 0 iff every actuation-center segment between q1 and q2 is free,
  /// sampled at half-voxel steps.
  int center_sweep_distance(const Configuration& q1, const Configuration& q2) const;

  /// Partition of particle indices; deterministic, disjoint, covering.
  std::vector<std::vector<int>> cluster_particles(std::span<const Configuration> particles) const;

  /// True when belief + {q} clusters into a single cluster.
  bool matches_belief(std::span<const Configuration> belief, const Configuration& q) const;

  const ClusteringConfig& config() const { return cfg_; }
  double refine_threshold() const;
  double eps_goal() const { return eps_goal_; }
  const Simulator& simulator() const { return sim_; }

 private:
  const Simulator& sim_;
  ClusteringConfig cfg_;
  double eps_goal_;
};

}  // namespace rcp
