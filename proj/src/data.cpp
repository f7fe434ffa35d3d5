#include "cablecal/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "cablecal/error.hpp"
#include "cablecal/rng.hpp"

namespace cablecal {

void Workspace::validate() const {
  for (int i = 0; i < 3; ++i)
    if (!(hi[i] >= lo[i])) throw Error(Errc::invalid_argument, "workspace box has negative extent");
}

void Workspace::check_reachable(const KinematicParams& params) const {
  validate();
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 p((corner & 1) ? hi.x() : lo.x(), (corner & 2) ? hi.y() : lo.y(), (corner & 4) ? hi.z() : lo.z());
    const Vec3 q = wrist_joints_from_position(p, params).q;
    for (int j = 0; j < 3; ++j) {
      const auto [a, b] = params.joint_limits[j];
      if (q[j] < a || q[j] > b) {
        std::ostringstream os;
        os << "corner (" << p.transpose() << ") needs q" << (j + 1) << " = " << q[j];
        throw Error(Errc::workspace_unreachable, os.str());
      }
    }
  }
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].qc.allFinite() || !records[i].qp.allFinite())
      throw Error(Errc::invalid_argument, "non-finite dataset record");
    if (i > 0 && records[i].t <= records[i - 1].t)
      throw Error(Errc::invalid_argument, "dataset time stamps must strictly increase");
  }
}

std::string Dataset::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& r : records) {
    mix(&r.t, sizeof r.t);
    mix(r.qc.data(), sizeof(double) * 6);
    mix(r.qp.data(), sizeof(double) * 6);
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::vector<JointConfig> sample_random_trajectory(const Workspace& ws, int n, const KinematicParams& params,
                                                  std::uint64_t seed) {
  if (n < 1) throw Error(Errc::invalid_argument, "trajectory length must be at least 1");
  ws.check_reachable(params);
  Rng rng = make_rng(seed);
  std::vector<JointConfig> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = ws.lo[k] == ws.hi[k] ? ws.lo[k] : uniform(rng, ws.lo[k], ws.hi[k]);
    Vec6 q;
    q.head<3>() = wrist_joints_from_position(p, params).q;
    for (int j = 3; j < 6; ++j) q[j] = uniform(rng, params.joint_limits[j].first, params.joint_limits[j].second);
    out.emplace_back(q, Role::commanded);
  }
  return out;
}

namespace {

void check_pick_options(const PickPlaceOptions& opts) {
  if (opts.horizontal_waypoints < 1 || opts.vertical_waypoints < 1)
    throw Error(Errc::invalid_argument, "segments need at least one waypoint");
  const double smallest = std::min(opts.roll_range, opts.wrist_range);
  if (!(opts.min_swing >= 0.0) || opts.min_swing > smallest)
    throw Error(Errc::invalid_argument, "min_swing must lie in [0, smallest keyframe range]");
}

}  // namespace

Vec3 next_wrist_keyframe(Rng& rng, const Vec3& prev, const PickPlaceOptions& opts) {
  const Vec3 range(opts.roll_range, opts.wrist_range, opts.wrist_range);
  // draw the travel from the reachable set on either side, weighted by room
  Vec3 k;
  for (int j = 0; j < 3; ++j) {
    const double r = range[j], m = opts.min_swing;
    const double up = std::max(0.0, r - prev[j] - m), down = std::max(0.0, prev[j] + r - m);
    const double pick = uniform(rng, 0.0, up + down);
    k[j] = pick < up ? prev[j] + m + pick : prev[j] - m - (pick - up);
  }
  return k;
}

void append_segment(Trajectory& traj, const Vec3& from, const Vec3& to, const Vec3& from_wrist,
                    const Vec3& to_wrist, int steps, SegmentKind kind, const KinematicParams& params) {
  for (int i = 1; i <= steps; ++i) {
    const double s = static_cast<double>(i) / steps;
    Vec3 p = from + s * (to - from);
    if (kind == SegmentKind::horizontal) p.z() = from.z();
    else p.head<2>() = from.head<2>();
    Vec6 q;
    q.head<3>() = wrist_joints_from_position(p, params).q;
    q.tail<3>() = from_wrist + s * (to_wrist - from_wrist);
    traj.configs.emplace_back(q, Role::commanded);
    traj.kinds.push_back(kind);
  }
}

Trajectory sample_pick_place_trajectory(const Workspace& ws, int n_cycles, const KinematicParams& params,
                                        std::uint64_t seed, const PickPlaceOptions& opts) {
  if (n_cycles < 1) throw Error(Errc::invalid_argument, "need at least one pick/place cycle");
  check_pick_options(opts);
  ws.check_reachable(params);
  Rng rng = make_rng(seed);
  auto site = [&] {
    Vec3 p;
    for (int k = 0; k < 2; ++k) p[k] = ws.lo[k] == ws.hi[k] ? ws.lo[k] : uniform(rng, ws.lo[k], ws.hi[k]);
    p.z() = ws.hi.z();
    return p;
  };

  Trajectory traj;
  Vec3 pos = site();
  Vec3 wrist(uniform(rng, -opts.roll_range, opts.roll_range), uniform(rng, -opts.wrist_range, opts.wrist_range),
             uniform(rng, -opts.wrist_range, opts.wrist_range));
  auto segment = [&](const Vec3& to, int steps, SegmentKind kind) {
    const Vec3 to_wrist = next_wrist_keyframe(rng, wrist, opts);
    append_segment(traj, pos, to, wrist, to_wrist, steps, kind, params);
    pos = to;
    wrist = to_wrist;
  };
  for (int c = 0; c < n_cycles; ++c) {
    const Vec3 target = site();
    segment(target, opts.horizontal_waypoints, SegmentKind::horizontal);
    segment(Vec3(target.x(), target.y(), ws.lo.z()), opts.vertical_waypoints, SegmentKind::vertical);
    segment(target, opts.vertical_waypoints, SegmentKind::vertical);
  }
  return traj;
}

Trajectory sample_pick_place_waypoints(const Workspace& ws, int n, const KinematicParams& params, std::uint64_t seed,
                                       const PickPlaceOptions& opts) {
  if (n < 1) throw Error(Errc::invalid_argument, "trajectory length must be at least 1");
  const int per = opts.waypoints_per_cycle();
  Trajectory t = sample_pick_place_trajectory(ws, (n + per - 1) / per, params, seed, opts);
  t.configs.resize(static_cast<std::size_t>(n));
  t.kinds.resize(static_cast<std::size_t>(n));
  return t;
}

Dataset collect(const std::vector<JointConfig>& commands, Plant& plant, const CollectOptions& opts) {
  if (commands.empty()) throw Error(Errc::invalid_argument, "no commands to collect");
  Dataset ds;
  ds.meta.protocol = opts.protocol;
  ds.meta.seed = opts.seed;
  ds.meta.workspace = opts.workspace;
  ds.meta.plant_hash = plant.config().hash();
  ds.meta.mode = opts.mode;
  ds.records.reserve(commands.size());
  try {
    plant.reset(commands.front());
    for (std::size_t i = 0; i < commands.size(); ++i) {
      const JointConfig physical = plant.step(commands[i]);
      Record r;
      r.t = static_cast<std::int64_t>(i);
      r.qc = commands[i].q;
      if (opts.mode == CollectionMode::oracle) {
        r.qp = physical.q;
      } else {
        const RGBDFrame frame =
            synthesize_frame(physical, plant.params(), opts.camera, opts.noise, derive_seed(opts.seed, i));
        r.qp = estimate_configuration(frame, plant.params(), opts.camera).q.q;
      }
      ds.records.push_back(r);
    }
  } catch (const Error& e) {
    ds.meta.complete = false;
    ds.meta.abort_reason = e.what();
  }
  return ds;
}

Examples Examples::slice(Eigen::Index begin, Eigen::Index end) const {
  Examples out;
  out.options = options;
  const Eigen::Index n = end - begin;
  out.x = x.middleRows(begin, n);
  out.y = y.middleRows(begin, n);
  out.base = base.middleRows(begin, n);
  out.t.assign(t.begin() + begin, t.begin() + end);
  return out;
}

Examples make_examples(const Dataset& ds, const ExampleOptions& opts) {
  const int h = opts.horizon;
  if (h < 0) throw Error(Errc::invalid_argument, "horizon must be non-negative");
  const auto n = static_cast<int>(ds.size());
  if (h >= n) throw Error(Errc::history_too_long, "horizon " + std::to_string(h) + " needs more than " +
                                                      std::to_string(n) + " records");
  if (opts.direction == Direction::inverse && opts.input == InputFormat::est)
    throw Error(Errc::format_violation, "inverse models only take the cmd input format");

  const int j0 = first_joint(opts.joints);
  const int nj = joint_count(opts.joints);
  const int rows = n - h;
  Examples ex;
  ex.options = opts;
  ex.x.resize(rows, (h + 1) * nj);
  ex.y.resize(rows, nj);
  ex.base = Eigen::MatrixXd::Zero(rows, nj);
  ex.t.resize(static_cast<std::size_t>(rows));
  const bool fwd = opts.direction == Direction::forward;
  for (int r = 0; r < rows; ++r) {
    const int t = r + h;
    const Record& now = ds.records[t];
    const Vec6& current = fwd ? now.qc : now.qp;
    const Vec6& target = fwd ? now.qp : now.qc;
    ex.x.row(r).segment(0, nj) = current.segment(j0, nj).transpose();
    for (int k = 1; k <= h; ++k) {
      const Record& past = ds.records[t - k];
      const Vec6& prior = (fwd && opts.input == InputFormat::est) ? past.qp : past.qc;
      ex.x.row(r).segment(k * nj, nj) = prior.segment(j0, nj).transpose();
    }
    if (opts.output == OutputFormat::delta) ex.base.row(r) = current.segment(j0, nj).transpose();
    ex.y.row(r) = target.segment(j0, nj).transpose() - ex.base.row(r);
    ex.t[static_cast<std::size_t>(r)] = now.t;
  }
  return ex;
}

RigidTransform register_rigid(std::span<const Vec3> robot, std::span<const Vec3> camera) {
  if (robot.size() != camera.size()) throw Error(Errc::shape_mismatch, "point sets differ in length");
  if (robot.size() < 3) throw Error(Errc::degenerate_geometry, "need at least 3 point pairs");
  const double n = static_cast<double>(robot.size());
  Vec3 mr = Vec3::Zero(), mc = Vec3::Zero();
  for (std::size_t i = 0; i < robot.size(); ++i) {
    mr += robot[i];
    mc += camera[i];
  }
  mr /= n;
  mc /= n;
  Mat3 cov = Mat3::Zero();
  double spread = 0.0;
  for (std::size_t i = 0; i < robot.size(); ++i) {
    cov += (camera[i] - mc) * (robot[i] - mr).transpose();
    spread = std::max(spread, (camera[i] - mc).norm());
  }
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(spread > 0.0) || sv[1] <= 1e-12 * std::max(sv[0], 1e-300))
    throw Error(Errc::degenerate_geometry, "points are coincident or collinear");
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  RigidTransform t;
  t.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  t.translation = mr - t.rotation * mc;
  return t;
}

void write_dataset_jsonl(std::ostream& os, const Dataset& ds) {
  for (const auto& r : ds.records) {
    nlohmann::json j;
    j["t"] = r.t;
    j["qc"] = std::vector<double>(r.qc.data(), r.qc.data() + 6);
    j["qp"] = std::vector<double>(r.qp.data(), r.qp.data() + 6);
    os << j.dump() << '\n';
  }
}

Dataset read_dataset_jsonl(std::istream& is) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Record r;
      r.t = j.at("t").get<std::int64_t>();
      const auto qc = j.at("qc").get<std::vector<double>>();
      const auto qp = j.at("qp").get<std::vector<double>>();
      if (qc.size() != 6 || qp.size() != 6) throw Error(Errc::parse, "qc/qp need 6 values");
      r.qc = Eigen::Map<const Vec6>(qc.data());
      r.qp = Eigen::Map<const Vec6>(qp.data());
      ds.records.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse, "dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  ds.validate();
  return ds;
}

nlohmann::json to_json(const DatasetMeta& m) {
  return {{"protocol", m.protocol},
          {"seed", m.seed},
          {"workspace", {{"lo", {m.workspace.lo.x(), m.workspace.lo.y(), m.workspace.lo.z()}},
                         {"hi", {m.workspace.hi.x(), m.workspace.hi.y(), m.workspace.hi.z()}}}},
          {"plant_hash", m.plant_hash},
          {"mode", m.mode == CollectionMode::oracle ? "oracle" : "fiducial"},
          {"complete", m.complete},
          {"abort_reason", m.abort_reason}};
}

DatasetMeta meta_from_json(const nlohmann::json& j) {
  DatasetMeta m;
  m.protocol = j.value("protocol", "");
  m.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("workspace")) {
    const auto lo = j["workspace"].at("lo").get<std::vector<double>>();
    const auto hi = j["workspace"].at("hi").get<std::vector<double>>();
    m.workspace.lo = Vec3(lo.at(0), lo.at(1), lo.at(2));
    m.workspace.hi = Vec3(hi.at(0), hi.at(1), hi.at(2));
  }
  m.plant_hash = j.value("plant_hash", "");
  m.mode = j.value("mode", "oracle") == "fiducial" ? CollectionMode::fiducial : CollectionMode::oracle;
  m.complete = j.value("complete", true);
  m.abort_reason = j.value("abort_reason", "");
  return m;
}

nlohmann::json to_json(const RigidTransform& t) {
  std::vector<double> r;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r.push_back(t.rotation(i, k));
  return {{"rotation", r}, {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

RigidTransform rigid_from_json(const nlohmann::json& j) {
  const auto r = j.at("rotation").get<std::vector<double>>();
  const auto tr = j.at("translation").get<std::vector<double>>();
  if (r.size() != 9 || tr.size() != 3) throw Error(Errc::parse, "transform needs 9 rotation and 3 translation values");
  RigidTransform t;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) t.rotation(i, k) = r[static_cast<std::size_t>(3 * i + k)];
  t.translation = Vec3(tr[0], tr[1], tr[2]);
  return t;
}

}  // namespace cablecal
