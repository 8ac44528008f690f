#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <span>
#include <vector>

#include "rcp/random.hpp"

namespace rcp {

inline constexpr double kPi = 3.14159265358979323846;

enum class SpaceType { SE2, SE3 };

/// Number of translational degrees of freedom (2 or 3).
constexpr int linear_dims(SpaceType s) { return s == SpaceType::SE2 ? 2 : 3; }
/// Number of rotational degrees of freedom (1 or 3).
constexpr int angular_dims(SpaceType s) { return s == SpaceType::SE2 ? 1 : 3; }
/// Tangent-space dimension (3 or 6).
constexpr int twist_dims(SpaceType s) { return s == SpaceType::SE2 ? 3 : 6; }

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

Eigen::Quaterniond quat_from_rotvec(const Eigen::Vector3d& v);
/// Rotation vector of the shortest rotation represented by q.
Eigen::Vector3d rotvec_from_quat(const Eigen::Quaterniond& q);

/// Rigid-body configuration. SE(2) states keep translation.z() == 0 and
/// rotate about the z axis only; both cases share the quaternion storage.
struct Configuration {
  SpaceType space = SpaceType::SE2;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  static Configuration se2(double x, double y, double yaw);
  static Configuration se3(const Eigen::Vector3d& t, const Eigen::Quaterniond& q);

  /// Heading in (-pi, pi]. Only meaningful for SE(2) states.
  double yaw() const;

  /// Maps a body-frame point into the world frame.
  Eigen::Vector3d transform_point(const Eigen::Vector3d& body_point) const {
    return rotation * body_point + translation;
  }
};

/// Tangent-space displacement: a linear offset plus a world-frame rotation
/// vector. SE(2) twists keep linear.z() == 0 and angular = (0, 0, yaw_rate).
struct Twist {
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();

  Twist operator+(const Twist& o) const { return {linear + o.linear, angular + o.angular}; }
  Twist operator-(const Twist& o) const { return {linear - o.linear, angular - o.angular}; }
  Twist operator*(double s) const { return {linear * s, angular * s}; }
  double linear_norm() const { return linear.norm(); }
  double angular_norm() const { return angular.norm(); }
};

/// Applies a twist on the left: the result rotation is exp(angular) * q.rotation.
Configuration apply_twist(const Configuration& q, const Twist& d);
/// Twist d with apply_twist(from, d) == to (up to normalization).
Twist twist_between(const Configuration& from, const Configuration& to);

/// Distance weighting between translation (meters) and rotation (radians).
struct SpaceMetric {
  double rotation_weight = 1.0;  ///< meters per radian; must be positive.
};

/// Weighted metric: Euclidean translation distance plus weighted geodesic
/// rotation angle. Throws std::invalid_argument for mixed-space arguments.
double distance(const Configuration& a, const Configuration& b, const SpaceMetric& m);

/// Linear translation interpolation with shortest-path rotation interpolation,
/// t in [0, 1].
Configuration interpolate(const Configuration& a, const Configuration& b, double t);

/// Truncated-normal actuation noise. Bounds are velocity magnitudes per axis;
/// the standard deviation of each axis draw is half its bound.
struct NoiseModel {
  double gamma = 0.0;          ///< scenario-level noise knob, for reporting
  double linear_bound = 0.0;   ///< m/s
  double angular_bound = 0.0;  ///< rad/s

  /// Convention used by all bundled scenarios: linear bound = gamma m/s,
  /// angular bound = gamma / 4 rad/s.
  static NoiseModel from_gamma(double gamma) {
    return {gamma, gamma, 0.25 * gamma};
  }
  static NoiseModel zero() { return {}; }
  bool is_zero() const { return linear_bound <= 0.0 && angular_bound <= 0.0; }
};

/// Draws a velocity-space perturbation with per-axis truncated-normal
/// components: every axis satisfies |v| <= bound, with std = bound / 2.
/// The commanded motion is accepted for future error-dependent models but
/// does not influence this additive draw. gamma == 0 yields a zero twist.
Twist sample_noise(const Twist& control, const NoiseModel& model, SpaceType space,
                   RandomStream& rng);

/// Axis-aligned sampling bounds. SE(2) samples yaw in [yaw_min, yaw_max];
/// SE(3) samples either a uniform random rotation or a fixed one.
struct SampleBounds {
  SpaceType space = SpaceType::SE2;
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();
  double yaw_min = -kPi;
  double yaw_max = kPi;
  bool free_rotation = true;
  Eigen::Quaterniond fixed_rotation = Eigen::Quaterniond::Identity();
};

/// Uniform configuration draw. Throws std::invalid_argument on empty bounds.
Configuration sample_uniform(const SampleBounds& bounds, RandomStream& rng);

/// A belief is an unordered set of equally weighted particles.
using BeliefState = std::vector<Configuration>;

/// Mean configuration: per-axis translation mean; circular yaw mean for SE(2);
/// normalized sign-aligned quaternion average for SE(3). Throws on empty input.
Configuration expect(std::span<const Configuration> belief);

/// Per-dimension population variance (divide by N) about expect(belief), with
/// rotation deviations measured in tangent coordinates. Length twist_dims.
Eigen::VectorXd variance(std::span<const Configuration> belief);

/// L1 norm of variance(belief); the spread statistic used by node proximity.
double variance_l1(std::span<const Configuration> belief);

}  // namespace rcp
