#include "rcp/environment.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rcp {

namespace {

int axis_count(SpaceType space) { return linear_dims(space); }

int grid_cells(double lo, double hi, double res) {
  const int n = static_cast<int>(std::ceil((hi - lo) / res - 1e-9));
  return n < 1 ? 1 : n;
}

}  // namespace

bool boxes_overlap(const Box& a, const Box& b, int active_dims) {
  for (int d = 0; d < active_dims; ++d) {
    const double lo = std::max(a.min[d], b.min[d]);
    const double hi = std::min(a.max[d], b.max[d]);
    if (hi - lo <= 1e-12) {
      return false;
    }
  }
  return true;
}

RobotModel RobotModel::from_points(std::vector<Eigen::Vector3d> points,
                                   std::vector<Eigen::Vector3d> actuation_centers) {
  if (points.empty()) {
    throw std::invalid_argument("RobotModel: at least one body point is required");
  }
  RobotModel m;
  m.points = std::move(points);
  m.actuation_centers = std::move(actuation_centers);
  double r = 0.0;
  for (const Eigen::Vector3d& p : m.points) {
    r = std::max(r, p.norm());
  }
  for (const Eigen::Vector3d& p : m.actuation_centers) {
    r = std::max(r, p.norm());
  }
  m.bounding_radius = r;
  return m;
}

bool VoxelEnvironment::voxel_index(const Eigen::Vector3d& p, int& ix, int& iy, int& iz) const {
  if (!in_bounds(p)) {
    return false;
  }
  ix = static_cast<int>(std::floor((p.x() - origin_.x()) / resolution_));
  iy = static_cast<int>(std::floor((p.y() - origin_.y()) / resolution_));
  iz = static_cast<int>(std::floor((p.z() - origin_.z()) / resolution_));
  ix = std::min(std::max(ix, 0), nx_ - 1);
  iy = std::min(std::max(iy, 0), ny_ - 1);
  iz = std::min(std::max(iz, 0), nz_ - 1);
  return true;
}

bool VoxelEnvironment::in_bounds(const Eigen::Vector3d& p) const { return bounds_.contains(p); }

bool VoxelEnvironment::occupied(const Eigen::Vector3d& p) const {
  int ix, iy, iz;
  if (!voxel_index(p, ix, iy, iz)) {
    return false;
  }
  return occupancy_[flat(ix, iy, iz)] != 0;
}

std::uint32_t VoxelEnvironment::region_mask(const Eigen::Vector3d& p) const {
  int ix, iy, iz;
  if (!voxel_index(p, ix, iy, iz)) {
    return 0;
  }
  return region_[flat(ix, iy, iz)];
}

Eigen::Vector3d VoxelEnvironment::voxel_center(int ix, int iy, int iz) const {
  return origin_ + resolution_ * Eigen::Vector3d(ix + 0.5, iy + 0.5, iz + 0.5);
}

bool VoxelEnvironment::voxel_occupied(int ix, int iy, int iz) const {
  if (ix < 0 || iy < 0 || iz < 0 || ix >= nx_ || iy >= ny_ || iz >= nz_) {
    return false;
  }
  return occupancy_[flat(ix, iy, iz)] != 0;
}

std::optional<Eigen::Vector3d> VoxelEnvironment::surface_normal(const Eigen::Vector3d& p) const {
  int ix, iy, iz;
  if (!voxel_index(p, ix, iy, iz) || occupancy_[flat(ix, iy, iz)] == 0) {
    return std::nullopt;
  }
  const std::size_t idx = flat(ix, iy, iz);
  if (has_normal_[idx]) {
    return normals_[idx];
  }
  // Interior voxel: nearest face of the obstacle box containing the center.
  const Eigen::Vector3d c = voxel_center(ix, iy, iz);
  const int dims = axis_count(space_);
  for (const Box& box : obstacles_) {
    if (!box.contains(c)) {
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    Eigen::Vector3d n = Eigen::Vector3d::UnitX();
    for (int d = 0; d < dims; ++d) {
      if (c[d] - box.min[d] < best) {
        best = c[d] - box.min[d];
        n = Eigen::Vector3d::Zero();
        n[d] = -1.0;
      }
      if (box.max[d] - c[d] < best) {
        best = box.max[d] - c[d];
        n = Eigen::Vector3d::Zero();
        n[d] = 1.0;
      }
    }
    return n;
  }
  return std::nullopt;
}

VoxelEnvironment build_environment(SpaceType space, const Box& bounds, double resolution,
                                   const std::vector<Box>& obstacles,
                                   const std::vector<RegionBox>& regions, bool validate_regions) {
  if (resolution <= 0.0) {
    throw std::invalid_argument("build_environment: resolution must be positive");
  }
  if (!bounds.valid()) {
    throw std::invalid_argument("build_environment: invalid workspace bounds");
  }
  const int dims = axis_count(space);
  for (const Box& b : obstacles) {
    if (!b.valid()) {
      throw std::invalid_argument("build_environment: invalid obstacle box");
    }
  }
  std::uint32_t seen_ids = 0;
  for (const RegionBox& r : regions) {
    if (r.id >= 32) {
      throw std::invalid_argument("build_environment: region id must be < 32");
    }
    if (seen_ids & (1u << r.id)) {
      throw std::invalid_argument("build_environment: duplicate region id");
    }
    seen_ids |= 1u << r.id;
    if (!r.box.valid()) {
      throw std::invalid_argument("build_environment: invalid region box");
    }
    if (validate_regions) {
      for (const Box& o : obstacles) {
        if (boxes_overlap(r.box, o, dims)) {
          throw std::invalid_argument(
              "build_environment: region overlaps an obstacle with positive volume");
        }
      }
    }
  }

  VoxelEnvironment env;
  env.space_ = space;
  env.resolution_ = resolution;
  env.bounds_ = bounds;
  env.obstacles_ = obstacles;
  env.regions_ = regions;

  if (space == SpaceType::SE2) {
    // Planar scenes live on the z == 0 plane inside a one-voxel-thick slab.
    env.bounds_.min.z() = -0.5 * resolution;
    env.bounds_.max.z() = 0.5 * resolution;
    for (Box& b : env.obstacles_) {
      b.min.z() = env.bounds_.min.z();
      b.max.z() = env.bounds_.max.z();
    }
    for (RegionBox& r : env.regions_) {
      r.box.min.z() = env.bounds_.min.z();
      r.box.max.z() = env.bounds_.max.z();
    }
  }

  env.origin_ = env.bounds_.min;
  env.nx_ = grid_cells(env.bounds_.min.x(), env.bounds_.max.x(), resolution);
  env.ny_ = grid_cells(env.bounds_.min.y(), env.bounds_.max.y(), resolution);
  env.nz_ = space == SpaceType::SE2
                ? 1
                : grid_cells(env.bounds_.min.z(), env.bounds_.max.z(), resolution);

  const std::size_t total = static_cast<std::size_t>(env.nx_) * env.ny_ * env.nz_;
  env.occupancy_.assign(total, 0);
  env.region_.assign(total, 0);
  env.normals_.assign(total, Eigen::Vector3d::Zero());
  env.has_normal_.assign(total, 0);

  for (int iz = 0; iz < env.nz_; ++iz) {
    for (int iy = 0; iy < env.ny_; ++iy) {
      for (int ix = 0; ix < env.nx_; ++ix) {
        const Eigen::Vector3d c = env.voxel_center(ix, iy, iz);
        const std::size_t idx = env.flat(ix, iy, iz);
        for (const Box& b : env.obstacles_) {
          if (b.contains(c)) {
            env.occupancy_[idx] = 1;
            ++env.occupied_count_;
            break;
          }
        }
        for (const RegionBox& r : env.regions_) {
          if (r.box.contains(c)) {
            env.region_[idx] |= 1u << r.id;
          }
        }
      }
    }
  }

  // Surface normals: mean of the directions toward free 6-neighbors.
  // Neighbors outside the grid are not free space and do not contribute.
  for (int iz = 0; iz < env.nz_; ++iz) {
    for (int iy = 0; iy < env.ny_; ++iy) {
      for (int ix = 0; ix < env.nx_; ++ix) {
        const std::size_t idx = env.flat(ix, iy, iz);
        if (!env.occupancy_[idx]) {
          continue;
        }
        Eigen::Vector3d n = Eigen::Vector3d::Zero();
        const int offs[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (const auto& o : offs) {
          const int jx = ix + o[0], jy = iy + o[1], jz = iz + o[2];
          if (jx < 0 || jy < 0 || jz < 0 || jx >= env.nx_ || jy >= env.ny_ || jz >= env.nz_) {
            continue;
          }
          if (!env.occupancy_[env.flat(jx, jy, jz)]) {
            n += Eigen::Vector3d(o[0], o[1], o[2]);
          }
        }
        if (n.norm() > 1e-12) {
          env.normals_[idx] = n.normalized();
          env.has_normal_[idx] = 1;
        }
      }
    }
  }
  return env;
}

namespace {

struct ExitCandidate {
  double depth = std::numeric_limits<double>::infinity();
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  bool leads_to_free = false;
};

/// Minimal exit from one box, preferring faces whose far side is free space
/// (abutting boxes would otherwise trade penetration back and forth).
void consider_box_exits(const VoxelEnvironment& env, const Box& box, const Eigen::Vector3d& p,
                        int dims, ExitCandidate& best) {
  for (int d = 0; d < dims; ++d) {
    for (int side = 0; side < 2; ++side) {
      const double depth = side == 0 ? p[d] - box.min[d] : box.max[d] - p[d];
      Eigen::Vector3d n = Eigen::Vector3d::Zero();
      n[d] = side == 0 ? -1.0 : 1.0;
      const Eigen::Vector3d probe = p + n * (depth + 0.5 * env.resolution());
      const bool free_beyond = env.in_bounds(probe) && !env.occupied(probe);
      const bool better = (free_beyond && !best.leads_to_free) ||
                          (free_beyond == best.leads_to_free && depth < best.depth);
      if (better) {
        best.depth = depth;
        best.normal = n;
        best.leads_to_free = free_beyond;
      }
    }
  }
}

}  // namespace

std::vector<Contact> check_collision(const VoxelEnvironment& env, const RobotModel& robot,
                                     const Configuration& q) {
  std::vector<Contact> contacts;
  const int dims = axis_count(env.space());
  const Box& bounds = env.bounds();
  for (int i = 0; i < static_cast<int>(robot.points.size()); ++i) {
    const Eigen::Vector3d world = q.transform_point(robot.points[i]);
    if (!env.in_bounds(world)) {
      Eigen::Vector3d clamped = world;
      for (int d = 0; d < 3; ++d) {
        clamped[d] = std::min(std::max(clamped[d], bounds.min[d]), bounds.max[d]);
      }
      const Eigen::Vector3d delta = clamped - world;
      const double depth = delta.norm();
      if (depth > 1e-12) {
        contacts.push_back({i, depth, delta / depth});
      }
      continue;
    }
    if (!env.occupied(world)) {
      continue;
    }
    ExitCandidate best;
    bool in_any_box = false;
    for (const Box& box : env.obstacles()) {
      if (box.contains(world)) {
        in_any_box = true;
        consider_box_exits(env, box, world, dims, best);
      }
    }
    if (!in_any_box) {
      // Discretization margin: the point sits in an occupied voxel but outside
      // every box. Treat the voxel itself as the penetrated solid.
      const auto n = env.surface_normal(world);
      if (n) {
        best.normal = *n;
        best.depth = 0.25 * env.resolution();
      } else {
        continue;
      }
    }
    contacts.push_back({i, std::max(best.depth, 1e-9), best.normal});
  }
  return contacts;
}

RegionSignature region_signature(const VoxelEnvironment& env, const RobotModel& robot,
                                 const Configuration& q) {
  RegionSignature sig;
  sig.point_masks.reserve(robot.points.size());
  for (const Eigen::Vector3d& p : robot.points) {
    sig.point_masks.push_back(env.region_mask(q.transform_point(p)));
  }
  return sig;
}

double signature_distance(const RegionSignature& a, const RegionSignature& b) {
  if (a.point_masks.size() != b.point_masks.size() || a.point_masks.empty()) {
    throw std::invalid_argument("signature_distance: mismatched signatures");
  }
  std::size_t disjoint = 0;
  for (std::size_t i = 0; i < a.point_masks.size(); ++i) {
    // Two unlabeled points count as sharing, so d(s, s) == 0 holds everywhere.
    if ((a.point_masks[i] & b.point_masks[i]) == 0 &&
        (a.point_masks[i] | b.point_masks[i]) != 0) {
      ++disjoint;
    }
  }
  return static_cast<double>(disjoint) / static_cast<double>(a.point_masks.size());
}

Eigen::MatrixXd point_jacobian(const RobotModel& robot, const Configuration& q, int point_index) {
  if (point_index < 0 || point_index >= static_cast<int>(robot.points.size())) {
    throw std::invalid_argument("point_jacobian: point index out of range");
  }
  const Eigen::Vector3d r = q.rotation * robot.points[point_index];  // p_world - t
  if (q.space == SpaceType::SE2) {
    Eigen::MatrixXd j(2, 3);
    j << 1.0, 0.0, -r.y(), 0.0, 1.0, r.x();
    return j;
  }
  Eigen::MatrixXd j(3, 6);
  j.setZero();
  j.block<3, 3>(0, 0).setIdentity();
  // -skew(r)
  j(0, 4) = r.z();
  j(0, 5) = -r.y();
  j(1, 3) = -r.z();
  j(1, 5) = r.x();
  j(2, 3) = r.y();
  j(2, 4) = -r.x();
  return j;
}

}  // namespace rcp
