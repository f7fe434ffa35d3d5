#pragma once

#include <array>
#include <string_view>

#include <Eigen/Dense>

namespace cablecal {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

inline constexpr int kNumJoints = 6;
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double rad2deg(double r) { return r * 180.0 / kPi; }
inline constexpr double deg2rad(double d) { return d * kPi / 180.0; }

/// What a joint vector stands for. The same numbers mean different things
/// depending on whether they were sent to the motors, realized at the
/// joints, asked for by a planner, or produced by an estimator.
enum class Role { commanded, physical, desired, estimated };

std::string_view to_string(Role r);

/// Six joint values: q1, q2, q4, q5, q6 in radians, q3 (insertion) in meters.
struct JointConfig {
  Vec6 q = Vec6::Zero();
  Role role = Role::commanded;

  JointConfig() = default;
  explicit JointConfig(const Vec6& values, Role r = Role::commanded) : q(values), role(r) {}

  double operator[](int i) const { return q[i]; }
  double& operator[](int i) { return q[i]; }

  Vec3 arm() const { return q.head<3>(); }
  Vec3 wrist() const { return q.tail<3>(); }
  void set_arm(const Vec3& v) { q.head<3>() = v; }
  void set_wrist(const Vec3& v) { q.tail<3>() = v; }

  bool finite() const { return q.allFinite(); }
};

}  // namespace cablecal
