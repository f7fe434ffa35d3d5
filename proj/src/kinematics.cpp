#include "cablecal/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cablecal/error.hpp"

namespace cablecal {

namespace {

Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

}  // namespace

void KinematicParams::validate() const {
  if (!(l1 > 0.0) || !(l_tool > l1))
    throw Error(Errc::invalid_argument, "require l_tool > l1 > 0");
  if (shaft_offsets[0] == shaft_offsets[1])
    throw Error(Errc::invalid_argument, "shaft offsets must be distinct");
  if (!(jaw_cross_arm > 0.0)) throw Error(Errc::invalid_argument, "jaw_cross_arm must be positive");
  if (!(jaw_length >= 0.0)) throw Error(Errc::invalid_argument, "jaw_length must be non-negative");
  for (const auto& [lo, hi] : joint_limits)
    if (!(lo < hi)) throw Error(Errc::invalid_argument, "joint limit min must be below max");
}

Eigen::Isometry3d mdh_transform(double alpha, double a, double theta, double d) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.rotate(Eigen::AngleAxisd(alpha, Vec3::UnitX()));
  t.translate(Vec3(a, 0.0, 0.0));
  t.rotate(Eigen::AngleAxisd(theta, Vec3::UnitZ()));
  t.translate(Vec3(0.0, 0.0, d));
  return t;
}

Eigen::Isometry3d arm_transform(const Vec3& q123, const KinematicParams& params) {
  // alpha, a, theta, d per link
  return mdh_transform(kPi / 2, 0.0, q123[0] + kPi / 2, 0.0) *
         mdh_transform(-kPi / 2, 0.0, q123[1] - kPi / 2, 0.0) *
         mdh_transform(kPi / 2, 0.0, 0.0, q123[2] - params.l1);
}

Mat3 arm_rotation(const Vec3& q123) {
  // q3 only translates along z3
  return arm_transform(Vec3(q123[0], q123[1], 0.0), KinematicParams{}).linear();
}

Mat3 tool_rotation(const Vec3& q456) {
  return rot_z(-kPi / 2 - q456[0]) * rot_x(q456[2]) * rot_y(q456[1]);
}

Mat3 zero_jaw_rotation() { return arm_rotation(Vec3::Zero()) * tool_rotation(Vec3::Zero()); }

Vec3 wrist_position_from_joints(const Vec3& q123, const KinematicParams& params) {
  const double ext = params.extension(q123[2]);
  if (!(ext > 0.0)) throw Error(Errc::degenerate_extension, "l_tool - l1 + q3 must be positive");
  const double c1 = std::cos(q123[0]), s1 = std::sin(q123[0]);
  const double c2 = std::cos(q123[1]), s2 = std::sin(q123[1]);
  return {c2 * s1 * ext, -s2 * ext, -c1 * c2 * ext};
}

WristJoints wrist_joints_from_position(const Vec3& p, const KinematicParams& params) {
  const double norm = p.norm();
  if (!(norm > 0.0)) throw Error(Errc::singular_direction, "wrist position at the remote center");
  WristJoints out;
  const double horiz = std::hypot(p.x(), p.z());
  out.singular = horiz == 0.0;
  out.q[0] = out.singular ? 0.0 : std::atan2(p.x(), -p.z());
  out.q[1] = std::atan2(-p.y(), horiz);
  out.q[2] = norm + params.l1 - params.l_tool;
  return out;
}

Vec3 tool_joints_from_rotation(const Mat3& r_fid, const Vec3& q123, const KinematicParams&) {
  const Mat3 r = arm_rotation(q123).transpose() * r_fid;
  const double r12 = r(0, 1), r22 = r(1, 1);
  const double r31 = r(2, 0), r32 = r(2, 1), r33 = r(2, 2);
  const double cos6 = std::hypot(r31, r33);
  if (cos6 < 1e-9) throw Error(Errc::gimbal_degenerate, "sqrt(r31^2 + r33^2) below 1e-9");
  return {std::atan2(-r22, r12), std::atan2(-r31, r33), std::atan2(r32, cos6)};
}

bool within_limits(const Vec6& q, const KinematicParams& params) {
  for (int i = 0; i < kNumJoints; ++i) {
    const auto [lo, hi] = params.joint_limits[i];
    if (!std::isfinite(q[i]) || q[i] < lo || q[i] > hi) return false;
  }
  return true;
}

void check_limits(const Vec6& q, const KinematicParams& params) {
  for (int i = 0; i < kNumJoints; ++i) {
    const auto [lo, hi] = params.joint_limits[i];
    if (!std::isfinite(q[i]) || q[i] < lo || q[i] > hi) {
      std::ostringstream os;
      os << "joint " << (i + 1) << " = " << q[i] << " outside [" << lo << ", " << hi << "]";
      throw Error(Errc::limit_violation, os.str());
    }
  }
}

Vec6 clamp_to_limits(const Vec6& q, const KinematicParams& params, bool* clamped) {
  Vec6 out = q;
  bool any = false;
  for (int i = 0; i < kNumJoints; ++i) {
    const auto [lo, hi] = params.joint_limits[i];
    const double c = std::clamp(q[i], lo, hi);
    if (c != q[i]) any = true;
    out[i] = c;
  }
  if (clamped) *clamped = any;
  return out;
}

ToolPose forward_kinematics_unchecked(const Vec6& q, const KinematicParams& params) {
  ToolPose pose;
  const Vec3 q123 = q.head<3>();
  pose.wrist_position = wrist_position_from_joints(q123, params);
  const Mat3 r03 = arm_rotation(q123);
  pose.jaw_rotation = r03 * tool_rotation(q.tail<3>());
  pose.tip_position = pose.wrist_position + params.jaw_length * pose.jaw_rotation.col(2);

  const Vec3 shaft_dir = r03.col(2);  // remote center -> wrist
  pose.fiducial_centers[0] = pose.wrist_position - params.shaft_offsets[0] * shaft_dir;
  pose.fiducial_centers[1] = pose.wrist_position - params.shaft_offsets[1] * shaft_dir;
  const Vec3 ax = params.jaw_cross_arm * pose.jaw_rotation.col(0);
  const Vec3 ay = params.jaw_cross_arm * pose.jaw_rotation.col(1);
  pose.fiducial_centers[2] = pose.tip_position + ax;
  pose.fiducial_centers[3] = pose.tip_position - ax;
  pose.fiducial_centers[4] = pose.tip_position + ay;
  pose.fiducial_centers[5] = pose.tip_position - ay;
  return pose;
}

ToolPose forward_kinematics(const JointConfig& q, const KinematicParams& params) {
  check_limits(q.q, params);
  return forward_kinematics_unchecked(q.q, params);
}

Vec6 joints_for_tip(const Vec3& tip, const Vec3& q456, const KinematicParams& params) {
  Vec6 q;
  q.tail<3>() = q456;
  Vec3 wrist = tip - params.jaw_length * (zero_jaw_rotation().col(2));
  for (int it = 0; it < 50; ++it) {
    q.head<3>() = wrist_joints_from_position(wrist, params).q;
    const Mat3 r = arm_rotation(q.head<3>()) * tool_rotation(q456);
    const Vec3 next = tip - params.jaw_length * r.col(2);
    const double step = (next - wrist).norm();
    wrist = next;
    if (step < 1e-15) break;
  }
  q.head<3>() = wrist_joints_from_position(wrist, params).q;
  return q;
}

}  // namespace cablecal
