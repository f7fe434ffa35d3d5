#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cablecal/fiducial.hpp"
#include "cablecal/formats.hpp"
#include "cablecal/plant.hpp"
#include "cablecal/rng.hpp"

namespace cablecal {

/// Axis-aligned box of wrist positions in the robot base frame [m].
struct Workspace {
  Vec3 lo{-0.05, -0.04, -0.42};
  Vec3 hi{0.05, 0.04, -0.38};

  static Workspace standard() { return {}; }
  void validate() const;
  /// Throws Error(workspace_unreachable) if a box corner maps outside the arm limits.
  void check_reachable(const KinematicParams& params) const;
  Vec3 center() const { return 0.5 * (lo + hi); }
};

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

enum class CollectionMode { oracle, fiducial };

struct Record {
  std::int64_t t = 0;
  Vec6 qc = Vec6::Zero();
  Vec6 qp = Vec6::Zero();
};

struct DatasetMeta {
  std::string protocol;
  std::uint64_t seed = 0;
  Workspace workspace;
  std::string plant_hash;
  CollectionMode mode = CollectionMode::oracle;
  bool complete = true;
  std::string abort_reason;
};

/// Time-ordered (command, physical) pairs from one contiguous run.
struct Dataset {
  std::vector<Record> records;
  DatasetMeta meta;

  std::size_t size() const { return records.size(); }
  void validate() const;
  /// Stable digest of the numeric content.
  std::string hash() const;
};

enum class SegmentKind { horizontal, vertical };

struct Trajectory {
  std::vector<JointConfig> configs;
  std::vector<SegmentKind> kinds;  ///< one per config; the segment that produced it
};

struct PickPlaceOptions {
  int horizontal_waypoints = 6;
  int vertical_waypoints = 3;
  double roll_range = 1.5;   ///< |q4| bound of wrist keyframes [rad]
  double wrist_range = 0.9;  ///< |q5|, |q6| bound of wrist keyframes [rad]
  double min_swing = 0.6;    ///< least per-joint change between consecutive wrist keyframes [rad]

  int waypoints_per_cycle() const { return horizontal_waypoints + 2 * vertical_waypoints; }
};

/// Uniform wrist positions in the box, wrist joints uniform within their limits.
std::vector<JointConfig> sample_random_trajectory(const Workspace& ws, int n, const KinematicParams& params,
                                                  std::uint64_t seed);

/// Random wrist keyframe that differs from `prev` by at least min_swing in
/// every joint while staying inside the keyframe ranges.
Vec3 next_wrist_keyframe(Rng& rng, const Vec3& prev, const PickPlaceOptions& opts);

/// Appends `steps` waypoints moving the wrist site from `from` to `to` (the
/// coordinate held by `kind` is pinned exactly) while the wrist joints
/// interpolate linearly between the two keyframes.
void append_segment(Trajectory& traj, const Vec3& from, const Vec3& to, const Vec3& from_wrist,
                    const Vec3& to_wrist, int steps, SegmentKind kind, const KinematicParams& params);

/// Each cycle: a horizontal move at the top of the box to a random site, a
/// vertical stroke down, and a stroke back up. Wrist joints interpolate
/// between random keyframes so every waypoint moves the wrist.
Trajectory sample_pick_place_trajectory(const Workspace& ws, int n_cycles, const KinematicParams& params,
                                        std::uint64_t seed, const PickPlaceOptions& opts = {});
/// Enough cycles to cover `n` waypoints, truncated to exactly `n`.
Trajectory sample_pick_place_waypoints(const Workspace& ws, int n, const KinematicParams& params,
                                       std::uint64_t seed, const PickPlaceOptions& opts = {});

struct CollectOptions {
  CollectionMode mode = CollectionMode::oracle;
  CameraModel camera = CameraModel::standard();
  FrameNoise noise;
  std::uint64_t seed = 0;
  std::string protocol = "custom";
  Workspace workspace;
};

/// Resets the plant at the first command and steps through all commands.
/// If a step fails, the records gathered so far are returned with
/// meta.complete = false.
Dataset collect(const std::vector<JointConfig>& commands, Plant& plant, const CollectOptions& opts);

struct ExampleOptions {
  int horizon = 0;
  InputFormat input = InputFormat::cmd;
  OutputFormat output = OutputFormat::delta;
  Direction direction = Direction::forward;
  JointSet joints = JointSet::wrist;
};

/// Windowed supervised examples, one row per time step t >= H.
///
/// Forward: x = [qc(t); prior(t-1); ...; prior(t-H)] with prior = qc (cmd)
/// or the recorded qp (est, teacher forcing); target qp(t).
/// Inverse: x = [qp(t); qc(t-1); ...; qc(t-H)]; target qc(t).
/// Delta targets subtract `base`, the first block of x.
struct Examples {
  Eigen::MatrixXd x;     ///< rows = examples, cols = (H + 1) * joints
  Eigen::MatrixXd y;     ///< rows = examples, cols = joints
  Eigen::MatrixXd base;  ///< added back to delta predictions; zero for abs
  std::vector<std::int64_t> t;
  ExampleOptions options;

  Eigen::Index rows() const { return x.rows(); }
  /// Rows in [begin, end).
  Examples slice(Eigen::Index begin, Eigen::Index end) const;
};

Examples make_examples(const Dataset& ds, const ExampleOptions& opts);

/// Least-squares rigid transform mapping camera points onto robot points.
RigidTransform register_rigid(std::span<const Vec3> points_robot, std::span<const Vec3> points_camera);

void write_dataset_jsonl(std::ostream& os, const Dataset& ds);
Dataset read_dataset_jsonl(std::istream& is);

nlohmann::json to_json(const DatasetMeta& meta);
DatasetMeta meta_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RigidTransform& t);
RigidTransform rigid_from_json(const nlohmann::json& j);

}  // namespace cablecal
