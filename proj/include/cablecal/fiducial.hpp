#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "cablecal/kinematics.hpp"

namespace cablecal {

inline constexpr int kBackgroundLabel = 0;
inline constexpr int kNumFiducials = 6;

/// Organized point cloud in the camera frame. Labels stand in for the
/// color mask: 0 is background, 1..6 identify the fiducial sphere.
struct RGBDFrame {
  std::vector<Vec3> points;
  std::vector<int> labels;
  std::vector<double> depth;

  std::size_t size() const { return points.size(); }
  void validate() const;
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  int support_count = 0;
  double residual_rms = 0.0;
};

/// Shaft spheres in label order (1, 2); jaw spheres in label order (3..6).
struct SphereSet {
  std::array<Sphere, 2> shaft{};
  std::array<std::optional<Sphere>, 4> jaw{};

  int jaw_count() const;
};

struct CameraModel {
  /// Maps robot-base coordinates into the camera frame.
  Eigen::Isometry3d camera_from_robot = Eigen::Isometry3d::Identity();
  double sphere_radius = 0.00635;
  /// Roughly the pixel footprint of a 12.7 mm ball about 1 m from a VGA depth sensor.
  int samples_per_sphere = 40;

  /// Camera at `standoff` from `target` along `direction`, optical axis (+z) toward the target.
  static CameraModel looking_at(const Vec3& target, const Vec3& direction, double standoff);
  /// 0.9 m standoff above and to the side of the default workspace.
  static CameraModel standard();

  Vec3 position_in_robot() const { return camera_from_robot.inverse().translation(); }
};

/// Displacement noise, each with a uniformly random direction and a magnitude
/// uniform in [0, max]. `point_max` perturbs every sampled surface point
/// independently; `sphere_max` shifts a sphere's whole sampled patch.
struct FrameNoise {
  double point_max = 0.0;
  double sphere_max = 0.0;
};

struct SegmentMask {
  double depth_min = 0.0;
  double depth_max = std::numeric_limits<double>::infinity();
  std::vector<int> labels{1, 2, 3, 4, 5, 6};
};

struct ConfigEstimate {
  JointConfig q{Vec6::Zero(), Role::estimated};
  SphereSet spheres;
  bool out_of_limits = false;
  bool singular = false;
};

/// Algebraic sphere fit: solves [x y z 1] c = x^2 + y^2 + z^2 in the least
/// squares sense, center = c[0:3] / 2, radius = sqrt(c3 + |center|^2).
Sphere fit_sphere(std::span<const Vec3> points);

std::map<int, std::vector<Vec3>> segment_spheres(const RGBDFrame& frame, const SegmentMask& mask = {});

/// Linear extrapolation along the shaft. `offset_a`, `offset_b` are the
/// distances of the two centers from the wrist.
Vec3 wrist_from_shaft_spheres(const Vec3& center_a, double offset_a, const Vec3& center_b, double offset_b);
Vec3 wrist_from_shaft_spheres(const std::array<Sphere, 2>& shaft, const KinematicParams& params);

/// Jaw cross frame from labeled tip centers (+x, -x, +y, -y). One missing
/// tip is rebuilt from the opposite tip and the center of the complete pair.
Mat3 jaw_rotation_from_spheres(const std::array<std::optional<Vec3>, 4>& tips);

/// Joint estimate from sphere centers already expressed in the robot frame.
ConfigEstimate estimate_from_spheres(const SphereSet& robot_frame_spheres, const KinematicParams& params);

ConfigEstimate estimate_configuration(const RGBDFrame& frame, const KinematicParams& params,
                                      const CameraModel& camera, const SegmentMask& mask = {});

RGBDFrame synthesize_frame(const JointConfig& q_p, const KinematicParams& params, const CameraModel& camera,
                           const FrameNoise& noise, std::uint64_t seed);

void write_frame_jsonl(std::ostream& os, const RGBDFrame& frame);
RGBDFrame read_frame_jsonl(std::istream& is);

}  // namespace cablecal
