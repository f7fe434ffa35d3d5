#include "cablecal/fiducial.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "cablecal/error.hpp"
#include "cablecal/rng.hpp"

namespace cablecal {

void RGBDFrame::validate() const {
  if (labels.size() != points.size() || depth.size() != points.size())
    throw Error(Errc::shape_mismatch, "points, labels and depth must have equal length");
  for (double d : depth)
    if (!(d >= 0.0)) throw Error(Errc::invalid_argument, "negative depth");
}

int SphereSet::jaw_count() const {
  int n = 0;
  for (const auto& s : jaw) n += s.has_value();
  return n;
}

CameraModel CameraModel::looking_at(const Vec3& target, const Vec3& direction, double standoff) {
  const Vec3 dir = direction.normalized();
  const Vec3 eye = target + standoff * dir;
  const Vec3 z = -dir;  // optical axis
  Vec3 up = Vec3::UnitZ();
  if (std::abs(up.dot(z)) > 0.99) up = Vec3::UnitY();
  const Vec3 x = up.cross(z).normalized();
  const Vec3 y = z.cross(x);
  Mat3 robot_from_cam;
  robot_from_cam.col(0) = x;
  robot_from_cam.col(1) = y;
  robot_from_cam.col(2) = z;
  CameraModel cam;
  Eigen::Isometry3d robot_T_cam = Eigen::Isometry3d::Identity();
  robot_T_cam.linear() = robot_from_cam;
  robot_T_cam.translation() = eye;
  cam.camera_from_robot = robot_T_cam.inverse();
  return cam;
}

CameraModel CameraModel::standard() {
  return looking_at(Vec3(0.0, 0.0, -0.40), Vec3(0.35, -0.45, 0.82), 0.9);
}

Sphere fit_sphere(std::span<const Vec3> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 4) throw Error(Errc::too_few_points, "sphere fit needs at least 4 points");

  // Shift to the centroid for conditioning; the fit is translation covariant.
  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(n);
  double scale = 0.0;
  for (const auto& p : points) scale = std::max(scale, (p - mean).norm());
  if (!(scale > 0.0)) throw Error(Errc::rank_deficiency, "all points coincide");

  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 p = (points[i] - mean) / scale;
    a.row(i) << p.x(), p.y(), p.z(), 1.0;
    b[i] = p.squaredNorm();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 4) throw Error(Errc::rank_deficiency, "points are coplanar or collinear");
  const Eigen::Vector4d c = qr.solve(b);

  const Vec3 local = 0.5 * c.head<3>();
  const double r2 = c[3] + local.squaredNorm();
  if (!(r2 > 0.0)) throw Error(Errc::rank_deficiency, "fit produced a non-positive radius");

  Sphere s;
  s.center = mean + scale * local;
  s.radius = scale * std::sqrt(r2);
  s.support_count = static_cast<int>(n);
  double acc = 0.0;
  for (const auto& p : points) {
    const double r = (p - s.center).norm() - s.radius;
    acc += r * r;
  }
  s.residual_rms = std::sqrt(acc / static_cast<double>(n));
  return s;
}

std::map<int, std::vector<Vec3>> segment_spheres(const RGBDFrame& frame, const SegmentMask& mask) {
  frame.validate();
  if (frame.size() == 0) throw Error(Errc::invalid_argument, "empty frame");
  std::map<int, std::vector<Vec3>> out;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const int label = frame.labels[i];
    if (label == kBackgroundLabel) continue;
    if (std::find(mask.labels.begin(), mask.labels.end(), label) == mask.labels.end()) continue;
    if (frame.depth[i] < mask.depth_min || frame.depth[i] > mask.depth_max) continue;
    out[label].push_back(frame.points[i]);
  }
  std::erase_if(out, [](const auto& kv) { return kv.second.size() < 4; });
  if (out.empty()) throw Error(Errc::no_spheres_found, "no labeled sphere has 4 or more points");
  return out;
}

Vec3 wrist_from_shaft_spheres(const Vec3& center_a, double offset_a, const Vec3& center_b, double offset_b) {
  if ((center_a - center_b).norm() < 1e-12)
    throw Error(Errc::coincident_centers, "shaft sphere centers coincide");
  if (offset_a == offset_b) throw Error(Errc::invalid_argument, "shaft offsets must differ");
  return (offset_b * center_a - offset_a * center_b) / (offset_b - offset_a);
}

Vec3 wrist_from_shaft_spheres(const std::array<Sphere, 2>& shaft, const KinematicParams& params) {
  return wrist_from_shaft_spheres(shaft[0].center, params.shaft_offsets[0], shaft[1].center,
                                  params.shaft_offsets[1]);
}

Mat3 jaw_rotation_from_spheres(const std::array<std::optional<Vec3>, 4>& tips_in) {
  auto tips = tips_in;
  int present = 0;
  for (const auto& t : tips) present += t.has_value();
  if (present < 3) throw Error(Errc::unknown_identity, "need at least 3 identified jaw spheres");
  if (present == 3) {
    // index of the missing tip, its opposite, and the complete pair
    int missing = 0;
    while (tips[missing]) ++missing;
    const int opposite = missing ^ 1;
    const int pair = missing < 2 ? 2 : 0;
    const Vec3 center = 0.5 * (*tips[pair] + *tips[pair + 1]);
    tips[missing] = 2.0 * center - *tips[opposite];
  }
  const Vec3 ex = *tips[0] - *tips[1];
  const Vec3 ey = *tips[2] - *tips[3];
  const bool x_primary = ex.norm() >= ey.norm();
  const Vec3 primary = x_primary ? ex : ey;
  const Vec3 secondary = x_primary ? ey : ex;
  if (primary.norm() < 1e-12) throw Error(Errc::collinear_centers, "jaw sphere baseline collapsed");
  const Vec3 u = primary.normalized();
  const Vec3 v_raw = secondary - secondary.dot(u) * u;
  if (v_raw.norm() < 1e-9 * secondary.norm() || v_raw.norm() < 1e-12)
    throw Error(Errc::collinear_centers, "jaw sphere centers are collinear");
  const Vec3 v = v_raw.normalized();
  Mat3 r;
  if (x_primary) {
    r.col(0) = u;
    r.col(1) = v;
  } else {
    r.col(1) = u;
    r.col(0) = v;
  }
  r.col(2) = r.col(0).cross(r.col(1));
  return r;
}

ConfigEstimate estimate_from_spheres(const SphereSet& s, const KinematicParams& params) {
  if (s.jaw_count() < 3) throw Error(Errc::unknown_identity, "need at least 3 jaw spheres");
  ConfigEstimate est;
  est.spheres = s;
  const Vec3 wrist = wrist_from_shaft_spheres(s.shaft, params);
  const WristJoints wj = wrist_joints_from_position(wrist, params);
  est.singular = wj.singular;
  std::array<std::optional<Vec3>, 4> tips;
  for (int i = 0; i < 4; ++i)
    if (s.jaw[i]) tips[i] = s.jaw[i]->center;
  const Mat3 r_fid = jaw_rotation_from_spheres(tips);
  est.q.q.head<3>() = wj.q;
  est.q.q.tail<3>() = tool_joints_from_rotation(r_fid, wj.q, params);
  est.q.role = Role::estimated;
  est.out_of_limits = !within_limits(est.q.q, params);
  return est;
}

ConfigEstimate estimate_configuration(const RGBDFrame& frame, const KinematicParams& params,
                                      const CameraModel& camera, const SegmentMask& mask) {
  const auto segments = segment_spheres(frame, mask);
  const Eigen::Isometry3d robot_from_camera = camera.camera_from_robot.inverse();
  SphereSet set;
  for (int label : {1, 2}) {
    const auto it = segments.find(label);
    if (it == segments.end()) throw Error(Errc::no_spheres_found, "shaft sphere " + std::to_string(label) + " missing");
    set.shaft[label - 1] = fit_sphere(it->second);
  }
  for (int label = 3; label <= 6; ++label) {
    const auto it = segments.find(label);
    if (it != segments.end()) set.jaw[label - 3] = fit_sphere(it->second);
  }
  for (auto& s : set.shaft) s.center = robot_from_camera * s.center;
  for (auto& s : set.jaw)
    if (s) s->center = robot_from_camera * s->center;
  return estimate_from_spheres(set, params);
}

RGBDFrame synthesize_frame(const JointConfig& q_p, const KinematicParams& params, const CameraModel& camera,
                           const FrameNoise& noise, std::uint64_t seed) {
  const ToolPose pose = forward_kinematics(q_p, params);
  Rng rng = make_rng(seed);
  const Vec3 eye = camera.position_in_robot();
  const int per = camera.samples_per_sphere;
  RGBDFrame frame;
  frame.points.reserve(static_cast<std::size_t>(kNumFiducials * per));
  for (int k = 0; k < kNumFiducials; ++k) {
    const Vec3& c = pose.fiducial_centers[k];
    const Vec3 toward = (eye - c).normalized();
    const Vec3 shift = bounded_displacement(rng, noise.sphere_max);
    for (int i = 0; i < per; ++i) {
      Vec3 n = uniform_direction(rng);
      if (n.dot(toward) < 0.0) n = -n;
      Vec3 p = c + camera.sphere_radius * n + shift + bounded_displacement(rng, noise.point_max);
      p = camera.camera_from_robot * p;
      frame.points.push_back(p);
      frame.labels.push_back(k + 1);
      frame.depth.push_back(p.norm());
    }
  }
  return frame;
}

void write_frame_jsonl(std::ostream& os, const RGBDFrame& frame) {
  frame.validate();
  for (std::size_t i = 0; i < frame.size(); ++i) {
    nlohmann::json j{{"x", frame.points[i].x()},
                     {"y", frame.points[i].y()},
                     {"z", frame.points[i].z()},
                     {"label", frame.labels[i]}};
    os << j.dump() << '\n';
  }
}

RGBDFrame read_frame_jsonl(std::istream& is) {
  RGBDFrame frame;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const Vec3 p(j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>());
      frame.points.push_back(p);
      frame.labels.push_back(j.at("label").get<int>());
      frame.depth.push_back(p.norm());
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse, "frame line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return frame;
}

}  // namespace cablecal
