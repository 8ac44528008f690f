#include "rcp/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rcp {

DistanceMatrix DistanceMatrix::create(int n) {
  if (n < 1) {
    throw std::invalid_argument("DistanceMatrix: n must be positive");
  }
  DistanceMatrix dm;
  dm.n = n;
  dm.entries.assign(static_cast<std::size_t>(n) * n, 0.0);
  return dm;
}

std::vector<std::vector<int>> complete_link_cluster(const DistanceMatrix& dm, double threshold) {
  const int n = dm.n;
  if (n < 1 || dm.entries.size() != static_cast<std::size_t>(n) * n) {
    throw std::invalid_argument("complete_link_cluster: malformed matrix");
  }
  std::vector<std::vector<int>> clusters(n);
  for (int i = 0; i < n; ++i) {
    clusters[i] = {i};
  }
  // Complete-link distances between live clusters (Lance-Williams update:
  // the merged linkage is the max of the parents' linkages).
  std::vector<std::vector<double>> link(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      link[i][j] = dm.at(i, j);
    }
  }
  std::vector<bool> alive(n, true);

  while (true) {
    int best_a = -1, best_b = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a) {
      if (!alive[a]) {
        continue;
      }
      for (int b = a + 1; b < n; ++b) {
        if (!alive[b]) {
          continue;
        }
        const double d = link[a][b];
        if (d > threshold) {
          continue;
        }
        // Cluster indices equal their min item (merges keep the smaller slot),
        // so (a, b) ascending scan realizes the deterministic tie-break.
        if (d < best_d) {
          best_d = d;
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best_a < 0) {
      break;
    }
    std::vector<int> merged;
    std::merge(clusters[best_a].begin(), clusters[best_a].end(), clusters[best_b].begin(),
               clusters[best_b].end(), std::back_inserter(merged));
    clusters[best_a] = std::move(merged);
    alive[best_b] = false;
    for (int c = 0; c < n; ++c) {
      if (!alive[c] || c == best_a) {
        continue;
      }
      const double d = std::max(link[best_a][c], link[best_b][c]);
      link[best_a][c] = d;
      link[c][best_a] = d;
    }
  }

  std::vector<std::vector<int>> out;
  for (int i = 0; i < n; ++i) {
    if (alive[i]) {
      out.push_back(std::move(clusters[i]));
    }
  }
  return out;  // already ordered by first item: slot index == min item
}

std::string to_string(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::PairwiseSim:
      return "pairwise_sim";
    case ClusterMethod::RegionOverlap:
      return "region_overlap";
    case ClusterMethod::CenterSweep:
      return "center_sweep";
  }
  return "region_overlap";
}

ClusterMethod cluster_method_from_string(const std::string& s) {
  if (s == "pairwise_sim") {
    return ClusterMethod::PairwiseSim;
  }
  if (s == "region_overlap") {
    return ClusterMethod::RegionOverlap;
  }
  if (s == "center_sweep") {
    return ClusterMethod::CenterSweep;
  }
  throw std::invalid_argument("unknown cluster method: " + s);
}

ClusterEngine::ClusterEngine(const Simulator& sim, ClusteringConfig cfg, double eps_goal)
    : sim_(sim), cfg_(cfg), eps_goal_(eps_goal) {
  if (cfg_.region_threshold < 0.0 || cfg_.region_threshold > 1.0) {
    throw std::invalid_argument("ClusterEngine: region_threshold outside [0, 1]");
  }
  if (eps_goal_ <= 0.0) {
    throw std::invalid_argument("ClusterEngine: eps_goal must be positive");
  }
}

double ClusterEngine::refine_threshold() const {
  return cfg_.refine_threshold > 0.0 ? cfg_.refine_threshold : 2.0 * eps_goal_;
}

int ClusterEngine::pairwise_sim_distance(const Configuration& q1, const Configuration& q2) const {
  const int budget = std::max(1, sim_.planner_step_budget() / 4);
  RandomStream rng(0);  // unused: rollouts are noise-free
  const SimResult fwd = sim_.simulate_motion(q1, q2, rng, false, budget);
  if (distance(fwd.final, q2, sim_.metric()) > eps_goal_) {
    return 1;
  }
  const SimResult rev = sim_.simulate_motion(q2, q1, rng, false, budget);
  return distance(rev.final, q1, sim_.metric()) > eps_goal_ ? 1 : 0;
}

int ClusterEngine::center_sweep_distance(const Configuration& q1, const Configuration& q2) const {
  const RobotModel& robot = sim_.robot();
  if (robot.actuation_centers.empty()) {
    throw std::invalid_argument("center_sweep_distance: robot has no actuation centers");
  }
  const VoxelEnvironment& env = sim_.environment();
  const double step = 0.5 * env.resolution();
  for (const Eigen::Vector3d& c : robot.actuation_centers) {
    const Eigen::Vector3d w1 = q1.transform_point(c);
    const Eigen::Vector3d w2 = q2.transform_point(c);
    const double len = (w2 - w1).norm();
    const int steps = std::max(1, static_cast<int>(std::ceil(len / step)));
    for (int k = 0; k <= steps; ++k) {
      const Eigen::Vector3d p = w1 + (w2 - w1) * (static_cast<double>(k) / steps);
      if (!env.in_bounds(p) || env.occupied(p)) {
        return 1;
      }
    }
  }
  return 0;
}

std::vector<std::vector<int>> ClusterEngine::cluster_particles(
    std::span<const Configuration> particles) const {
  const int n = static_cast<int>(particles.size());
  if (n == 0) {
    throw std::invalid_argument("cluster_particles: empty particle set");
  }
  if (n == 1) {
    return {{0}};
  }

  DistanceMatrix dm = DistanceMatrix::create(n);
  double pass1_threshold = 0.0;
  switch (cfg_.method) {
    case ClusterMethod::RegionOverlap: {
      std::vector<RegionSignature> sigs;
      sigs.reserve(n);
      for (const Configuration& q : particles) {
        sigs.push_back(region_signature(sim_.environment(), sim_.robot(), q));
      }
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          dm.set(i, j, signature_distance(sigs[i], sigs[j]));
        }
      }
      pass1_threshold = cfg_.region_threshold;
      break;
    }
    case ClusterMethod::PairwiseSim: {
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          dm.set(i, j, pairwise_sim_distance(particles[i], particles[j]));
        }
      }
      break;
    }
    case ClusterMethod::CenterSweep: {
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          dm.set(i, j, center_sweep_distance(particles[i], particles[j]));
        }
      }
      break;
    }
  }

  const std::vector<std::vector<int>> pass1 = complete_link_cluster(dm, pass1_threshold);

  // Second pass: refine each feature cluster by plain C-space distance so
  // that spatially distant but feature-equivalent particles still split.
  const double refine = refine_threshold();
  std::vector<std::vector<int>> out;
  for (const std::vector<int>& cluster : pass1) {
    if (cluster.size() == 1) {
      out.push_back(cluster);
      continue;
    }
    const int m = static_cast<int>(cluster.size());
    DistanceMatrix sub = DistanceMatrix::create(m);
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        sub.set(i, j, distance(particles[cluster[i]], particles[cluster[j]], sim_.metric()));
      }
    }
    for (const std::vector<int>& piece : complete_link_cluster(sub, refine)) {
      std::vector<int> mapped;
      mapped.reserve(piece.size());
      for (int local : piece) {
        mapped.push_back(cluster[local]);
      }
      out.push_back(std::move(mapped));
    }
  }
  std::sort(out.begin(), out.end(),
            [](const std::vector<int>& a, const std::vector<int>& b) { return a[0] < b[0]; });
  return out;
}

bool ClusterEngine::matches_belief(std::span<const Configuration> belief,
                                   const Configuration& q) const {
  if (belief.empty()) {
    return false;
  }
  std::vector<Configuration> combined(belief.begin(), belief.end());
  combined.push_back(q);
  return cluster_particles(combined).size() == 1;
}

}  // namespace rcp
