#pragma once

#include <array>
#include <utility>

#include <Eigen/Geometry>

#include "cablecal/types.hpp"

namespace cablecal {

/// Geometry of the arm, the tool, and the fiducial carriers mounted on it.
///
/// Frames follow the modified (Craig) Denavit-Hartenberg convention for the
/// remote-center arm. The tool wrist uses a fixed closed-form rotation chain
/// so that tool_joints_from_rotation() is its exact inverse:
///
///   R_3^8(q4, q5, q6) = Rz(-pi/2 - q4) * Rx(q6) * Ry(q5)
///
/// At q = 0 the shaft points along -z of the base frame and the jaw frame
/// equals the arm frame 3 rotated by -pi/2 about the shaft.
struct KinematicParams {
  double l1 = 0.1;      ///< remote-center offset along the tool axis [m]
  double l_tool = 0.42; ///< tool length [m]
  /// Distances of the two shaft spheres from the wrist, measured back
  /// along the shaft toward the remote center [m]. Label 1 uses [0], label 2 uses [1].
  std::array<double, 2> shaft_offsets{0.04, 0.07};
  double jaw_cross_arm = 0.015; ///< center-to-sphere distance on the jaw cross [m]
  double jaw_length = 0.02;     ///< wrist-to-jaw-tip distance; the cross is centered at the tip [m]
  std::array<std::pair<double, double>, kNumJoints> joint_limits{{
      {-1.2, 1.2}, {-1.2, 1.2}, {0.0, 0.24}, {-2.2, 2.2}, {-1.5, 1.5}, {-1.5, 1.5}}};

  /// Throws Error(invalid_argument) when an invariant is broken.
  void validate() const;

  double extension(double q3) const { return l_tool - l1 + q3; }
};

/// Position and orientation of the tool plus the ideal fiducial centers.
struct ToolPose {
  Vec3 wrist_position = Vec3::Zero();
  Mat3 jaw_rotation = Mat3::Identity();
  Vec3 tip_position = Vec3::Zero();
  /// Labels 1..6: two shaft spheres, then jaw cross +x, -x, +y, -y.
  std::array<Vec3, 6> fiducial_centers{};
};

struct WristJoints {
  Vec3 q = Vec3::Zero();
  bool singular = false;  ///< x = z = 0, q1 set to 0 by convention
};

/// Modified DH link transform: Rot_x(alpha) Trans_x(a) Rot_z(theta) Trans_z(d).
Eigen::Isometry3d mdh_transform(double alpha, double a, double theta, double d);

/// Base-to-frame-3 transform of the remote-center arm.
Eigen::Isometry3d arm_transform(const Vec3& q123, const KinematicParams& params);
Mat3 arm_rotation(const Vec3& q123);
Mat3 tool_rotation(const Vec3& q456);
Mat3 zero_jaw_rotation();

Vec3 wrist_position_from_joints(const Vec3& q123, const KinematicParams& params);
WristJoints wrist_joints_from_position(const Vec3& p, const KinematicParams& params);
Vec3 tool_joints_from_rotation(const Mat3& r_fid, const Vec3& q123, const KinematicParams& params);

bool within_limits(const Vec6& q, const KinematicParams& params);
void check_limits(const Vec6& q, const KinematicParams& params);
/// Returns the clamped vector; `clamped` is set when any joint moved.
Vec6 clamp_to_limits(const Vec6& q, const KinematicParams& params, bool* clamped = nullptr);

ToolPose forward_kinematics(const JointConfig& q, const KinematicParams& params);
/// Same as forward_kinematics() without the limit check.
ToolPose forward_kinematics_unchecked(const Vec6& q, const KinematicParams& params);

/// Joint configuration that puts the jaw tip at `tip` with the given wrist
/// joints. Solved by fixed-point iteration on the wrist position.
Vec6 joints_for_tip(const Vec3& tip, const Vec3& q456, const KinematicParams& params);

}  // namespace cablecal
