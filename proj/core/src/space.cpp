#include "rcp/space.hpp"

#include <cmath>
#include <stdexcept>

namespace rcp {

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) {
    a += 2.0 * kPi;
  }
  return a - kPi;
}

Eigen::Quaterniond quat_from_rotvec(const Eigen::Vector3d& v) {
  const double angle = v.norm();
  if (angle < 1e-12) {
    // First-order expansion; normalized for safety.
    Eigen::Quaterniond q(1.0, 0.5 * v.x(), 0.5 * v.y(), 0.5 * v.z());
    q.normalize();
    return q;
  }
  const Eigen::Vector3d axis = v / angle;
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis));
}

Eigen::Vector3d rotvec_from_quat(const Eigen::Quaterniond& q) {
  Eigen::Quaterniond qn = q.normalized();
  if (qn.w() < 0.0) {
    qn.coeffs() *= -1.0;  // shortest representative
  }
  const double vec_norm = qn.vec().norm();
  if (vec_norm < 1e-12) {
    return 2.0 * qn.vec();
  }
  const double angle = 2.0 * std::atan2(vec_norm, qn.w());
  return qn.vec() * (angle / vec_norm);
}

Configuration Configuration::se2(double x, double y, double yaw) {
  Configuration q;
  q.space = SpaceType::SE2;
  q.translation = Eigen::Vector3d(x, y, 0.0);
  q.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(wrap_angle(yaw), Eigen::Vector3d::UnitZ()));
  return q;
}

Configuration Configuration::se3(const Eigen::Vector3d& t, const Eigen::Quaterniond& q) {
  Configuration c;
  c.space = SpaceType::SE3;
  c.translation = t;
  c.rotation = q.normalized();
  return c;
}

double Configuration::yaw() const {
  const Eigen::Vector3d rv = rotvec_from_quat(rotation);
  return wrap_angle(rv.z());
}

Configuration apply_twist(const Configuration& q, const Twist& d) {
  Configuration out = q;
  out.translation += d.linear;
  if (q.space == SpaceType::SE2) {
    out.translation.z() = 0.0;
    out.rotation = Eigen::Quaterniond(
        Eigen::AngleAxisd(wrap_angle(q.yaw() + d.angular.z()), Eigen::Vector3d::UnitZ()));
  } else {
    out.rotation = (quat_from_rotvec(d.angular) * q.rotation).normalized();
  }
  return out;
}

Twist twist_between(const Configuration& from, const Configuration& to) {
  if (from.space != to.space) {
    throw std::invalid_argument("twist_between: mixed-space configurations");
  }
  Twist d;
  d.linear = to.translation - from.translation;
  if (from.space == SpaceType::SE2) {
    d.linear.z() = 0.0;
    d.angular = Eigen::Vector3d(0.0, 0.0, wrap_angle(to.yaw() - from.yaw()));
  } else {
    d.angular = rotvec_from_quat(to.rotation * from.rotation.conjugate());
  }
  return d;
}

namespace {

double rotation_geodesic(const Configuration& a, const Configuration& b) {
  const double d = std::abs(a.rotation.coeffs().dot(b.rotation.coeffs()));
  const double c = std::min(d, 1.0);
  return 2.0 * std::atan2(std::sqrt(std::max(0.0, 1.0 - c * c)), c);
}

}  // namespace

double distance(const Configuration& a, const Configuration& b, const SpaceMetric& m) {
  if (a.space != b.space) {
    throw std::invalid_argument("distance: mixed-space configurations");
  }
  if (m.rotation_weight <= 0.0) {
    throw std::invalid_argument("distance: rotation_weight must be positive");
  }
  return (a.translation - b.translation).norm() + m.rotation_weight * rotation_geodesic(a, b);
}

Configuration interpolate(const Configuration& a, const Configuration& b, double t) {
  if (a.space != b.space) {
    throw std::invalid_argument("interpolate: mixed-space configurations");
  }
  if (t < 0.0 || t > 1.0) {
    throw std::invalid_argument("interpolate: t outside [0, 1]");
  }
  Configuration out = a;
  out.translation = (1.0 - t) * a.translation + t * b.translation;
  out.rotation = a.rotation.slerp(t, b.rotation).normalized();
  return out;
}

Twist sample_noise(const Twist& control, const NoiseModel& model, SpaceType space,
                   RandomStream& rng) {
  (void)control;
  Twist n;
  if (model.gamma == 0.0 && model.is_zero()) {
    return n;
  }
  const double ls = 0.5 * model.linear_bound;
  for (int i = 0; i < linear_dims(space); ++i) {
    n.linear[i] = rng.truncated_gaussian(ls, model.linear_bound);
  }
  const double as = 0.5 * model.angular_bound;
  if (space == SpaceType::SE2) {
    n.angular.z() = rng.truncated_gaussian(as, model.angular_bound);
  } else {
    for (int i = 0; i < 3; ++i) {
      n.angular[i] = rng.truncated_gaussian(as, model.angular_bound);
    }
  }
  return n;
}

Configuration sample_uniform(const SampleBounds& bounds, RandomStream& rng) {
  for (int i = 0; i < linear_dims(bounds.space); ++i) {
    if (bounds.min[i] > bounds.max[i]) {
      throw std::invalid_argument("sample_uniform: empty translation bounds");
    }
  }
  Configuration q;
  q.space = bounds.space;
  for (int i = 0; i < linear_dims(bounds.space); ++i) {
    q.translation[i] = rng.uniform(bounds.min[i], bounds.max[i]);
  }
  if (bounds.space == SpaceType::SE2) {
    if (bounds.yaw_min > bounds.yaw_max) {
      throw std::invalid_argument("sample_uniform: empty yaw bounds");
    }
    q.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(
        wrap_angle(rng.uniform(bounds.yaw_min, bounds.yaw_max)), Eigen::Vector3d::UnitZ()));
  } else if (bounds.free_rotation) {
    // Uniform unit quaternion (subgroup algorithm).
    const double u1 = rng.uniform01();
    const double u2 = rng.uniform01();
    const double u3 = rng.uniform01();
    const double a = std::sqrt(1.0 - u1);
    const double b = std::sqrt(u1);
    q.rotation = Eigen::Quaterniond(b * std::cos(2.0 * kPi * u3), a * std::sin(2.0 * kPi * u2),
                                    a * std::cos(2.0 * kPi * u2), b * std::sin(2.0 * kPi * u3));
    q.rotation.normalize();
  } else {
    q.rotation = bounds.fixed_rotation.normalized();
  }
  return q;
}

Configuration expect(std::span<const Configuration> belief) {
  if (belief.empty()) {
    throw std::invalid_argument("expect: empty belief");
  }
  const SpaceType space = belief.front().space;
  Configuration mean;
  mean.space = space;
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  for (const Configuration& q : belief) {
    if (q.space != space) {
      throw std::invalid_argument("expect: mixed-space belief");
    }
    t += q.translation;
  }
  mean.translation = t / static_cast<double>(belief.size());

  if (space == SpaceType::SE2) {
    double s = 0.0;
    double c = 0.0;
    for (const Configuration& q : belief) {
      const double yaw = q.yaw();
      s += std::sin(yaw);
      c += std::cos(yaw);
    }
    mean.translation.z() = 0.0;
    mean.rotation = Eigen::Quaterniond(
        Eigen::AngleAxisd(std::atan2(s, c), Eigen::Vector3d::UnitZ()));
  } else {
    // Coefficient average after sign alignment to the first particle; this is
    // the normalized-sum approximation of the rotation mean, adequate for the
    // concentrated beliefs produced by bounded actuation noise.
    const Eigen::Vector4d ref = belief.front().rotation.coeffs();
    Eigen::Vector4d sum = Eigen::Vector4d::Zero();
    for (const Configuration& q : belief) {
      Eigen::Vector4d c4 = q.rotation.coeffs();
      if (c4.dot(ref) < 0.0) {
        c4 *= -1.0;
      }
      sum += c4;
    }
    Eigen::Quaterniond q_mean(sum[3], sum[0], sum[1], sum[2]);
    if (q_mean.norm() < 1e-12) {
      q_mean = belief.front().rotation;  // degenerate spread, pick a representative
    }
    mean.rotation = q_mean.normalized();
  }
  return mean;
}

Eigen::VectorXd variance(std::span<const Configuration> belief) {
  if (belief.empty()) {
    throw std::invalid_argument("variance: empty belief");
  }
  const Configuration mean = expect(belief);
  const SpaceType space = mean.space;
  const int ld = linear_dims(space);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(twist_dims(space));
  for (const Configuration& q : belief) {
    for (int i = 0; i < ld; ++i) {
      const double d = q.translation[i] - mean.translation[i];
      var[i] += d * d;
    }
    if (space == SpaceType::SE2) {
      const double d = wrap_angle(q.yaw() - mean.yaw());
      var[2] += d * d;
    } else {
      const Eigen::Vector3d rv = rotvec_from_quat(q.rotation * mean.rotation.conjugate());
      for (int i = 0; i < 3; ++i) {
        var[3 + i] += rv[i] * rv[i];
      }
    }
  }
  var /= static_cast<double>(belief.size());
  return var;
}

double variance_l1(std::span<const Configuration> belief) {
  return variance(belief).lpNorm<1>();
}

}  // namespace rcp
