#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "rcp/space.hpp"

namespace rcp {

/// Axis-aligned box. SE(2) scenarios use x/y only; z extents are synthesized
/// so that the z == 0 plane lies inside every box.
struct Box {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();

  bool contains(const Eigen::Vector3d& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y() &&
           p.z() >= min.z() && p.z() <= max.z();
  }
  Eigen::Vector3d extent() const { return max - min; }
  bool valid() const {
    return min.x() <= max.x() && min.y() <= max.y() && min.z() <= max.z();
  }
};

/// Returns true when the boxes overlap with positive volume (touching faces
/// do not count). active_dims limits the test to x/y for planar scenes.
bool boxes_overlap(const Box& a, const Box& b, int active_dims);

/// Obstacle-free workspace region used for coarse belief discrimination.
/// Identifiers must be small, distinct integers; they index bitmask bits.
struct RegionBox {
  std::uint32_t id = 0;  ///< bit position, < 32
  Box box;
};

/// Discrete contact feature for one robot point.
struct Contact {
  int point_index = -1;
  double penetration_depth = 0.0;
  Eigen::Vector3d surface_normal = Eigen::Vector3d::Zero();  ///< unit, pointing out of the obstacle
};

/// Rigid body sampled into body-frame points, plus designated actuation
/// centers (grasp/actuation reference points used by trajectory clustering).
struct RobotModel {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> actuation_centers;
  double bounding_radius = 0.0;

  static RobotModel from_points(std::vector<Eigen::Vector3d> points,
                                std::vector<Eigen::Vector3d> actuation_centers);
};

/// Voxelized workspace: static occupancy, precomputed surface normals and
/// region bitmasks, immutable after construction. Occupancy is decided by
/// the voxel-center-inside-box rule.
class VoxelEnvironment {
 public:
  SpaceType space() const { return space_; }
  double resolution() const { return resolution_; }
  const Box& bounds() const { return bounds_; }
  const std::vector<Box>& obstacles() const { return obstacles_; }
  const std::vector<RegionBox>& regions() const { return regions_; }

  bool in_bounds(const Eigen::Vector3d& p) const;
  /// True when p lies in an occupied voxel. Out-of-bounds points are not
  /// occupied; callers treat them as a separate contact case.
  bool occupied(const Eigen::Vector3d& p) const;
  /// OR of region-id bits covering p; 0 outside all regions or out of bounds.
  std::uint32_t region_mask(const Eigen::Vector3d& p) const;
  /// Unit outward normal for occupied voxels: surface voxels average their
  /// free 6-neighbor directions, interior voxels fall back to the nearest
  /// face of their obstacle box. Empty for free or out-of-bounds points.
  std::optional<Eigen::Vector3d> surface_normal(const Eigen::Vector3d& p) const;

  std::size_t occupied_count() const { return occupied_count_; }
  Eigen::Vector3i grid_dims() const { return Eigen::Vector3i(nx_, ny_, nz_); }
  Eigen::Vector3d voxel_center(int ix, int iy, int iz) const;
  bool voxel_occupied(int ix, int iy, int iz) const;

  friend VoxelEnvironment build_environment(SpaceType space, const Box& bounds,
                                            double resolution, const std::vector<Box>& obstacles,
                                            const std::vector<RegionBox>& regions,
                                            bool validate_regions);

 private:
  VoxelEnvironment() = default;
  bool voxel_index(const Eigen::Vector3d& p, int& ix, int& iy, int& iz) const;
  std::size_t flat(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(nx_) *
               (static_cast<std::size_t>(iy) + static_cast<std::size_t>(ny_) * iz);
  }

  SpaceType space_ = SpaceType::SE2;
  double resolution_ = 0.0;
  Box bounds_;
  Eigen::Vector3d origin_ = Eigen::Vector3d::Zero();
  int nx_ = 0, ny_ = 0, nz_ = 0;
  std::vector<std::uint8_t> occupancy_;
  std::vector<std::uint32_t> region_;
  std::vector<Eigen::Vector3d> normals_;  ///< indexed per voxel; zero when free/interior-less
  std::vector<std::uint8_t> has_normal_;
  std::vector<Box> obstacles_;
  std::vector<RegionBox> regions_;
  std::size_t occupied_count_ = 0;
};

/// Rasterizes boxes into a fresh environment. Throws std::invalid_argument
/// when the resolution is non-positive, a region id is >= 32 or duplicated,
/// or (if validate_regions) a region overlaps an obstacle with positive
/// volume.
VoxelEnvironment build_environment(SpaceType space, const Box& bounds, double resolution,
                                   const std::vector<Box>& obstacles,
                                   const std::vector<RegionBox>& regions,
                                   bool validate_regions = true);

/// All contacts for the robot at q: one entry per robot point that sits in an
/// occupied voxel (analytic depth/normal against the obstacle boxes) or
/// outside the workspace bounds (pushed back toward the bounds box).
std::vector<Contact> check_collision(const VoxelEnvironment& env, const RobotModel& robot,
                                     const Configuration& q);

/// Per-point region bitmask vector at configuration q.
struct RegionSignature {
  std::vector<std::uint32_t> point_masks;
};

RegionSignature region_signature(const VoxelEnvironment& env, const RobotModel& robot,
                                 const Configuration& q);

/// Fraction of point slots whose bitmasks share no region bit; two unlabeled
/// points (both masks zero) count as sharing, so the distance of a signature
/// to itself is always 0. Signatures must have equal length.
double signature_distance(const RegionSignature& a, const RegionSignature& b);

/// Jacobian of the world position of one robot point with respect to the
/// configuration tangent. SE(2): 2x3 [[1,0,-ry],[0,1,rx]]; SE(3): 3x6
/// [I | -skew(p_world - t)].
Eigen::MatrixXd point_jacobian(const RobotModel& robot, const Configuration& q, int point_index);

}  // namespace rcp
