#include "cablecal/config.hpp"

#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <sstream>

#include "cablecal/error.hpp"

namespace cablecal {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw Error(Errc::parse, std::string(section) + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || item.key() == a;
    if (!ok) throw Error(Errc::parse, "unknown key '" + item.key() + "' in " + std::string(section));
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json vec3_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec3_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw Error(Errc::parse, "expected a 3-vector");
  return {v[0], v[1], v[2]};
}

// Wraps json type errors so callers see one error kind.
template <typename F>
auto parsing(std::string_view section, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string(section) + ": " + e.what());
  }
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json to_json(const KinematicParams& p) {
  json limits = json::array();
  for (const auto& [lo, hi] : p.joint_limits) limits.push_back({lo, hi});
  return {{"l1", p.l1},
          {"l_tool", p.l_tool},
          {"shaft_offsets", p.shaft_offsets},
          {"jaw_cross_arm", p.jaw_cross_arm},
          {"jaw_length", p.jaw_length},
          {"joint_limits", limits}};
}

KinematicParams kinematics_from_json(const json& j, KinematicParams p) {
  check_keys(j, "kinematics", {"l1", "l_tool", "shaft_offsets", "jaw_cross_arm", "jaw_length", "joint_limits"});
  return parsing("kinematics", [&] {
    read(j, "l1", p.l1);
    read(j, "l_tool", p.l_tool);
    read(j, "shaft_offsets", p.shaft_offsets);
    read(j, "jaw_cross_arm", p.jaw_cross_arm);
    read(j, "jaw_length", p.jaw_length);
    if (j.contains("joint_limits")) {
      const auto& l = j.at("joint_limits");
      if (!l.is_array() || l.size() != 6) throw Error(Errc::parse, "joint_limits needs six [lo, hi] pairs");
      for (std::size_t i = 0; i < 6; ++i) {
        const auto pair = l[i].get<std::vector<double>>();
        if (pair.size() != 2) throw Error(Errc::parse, "joint_limits needs six [lo, hi] pairs");
        p.joint_limits[i] = {pair[0], pair[1]};
      }
    }
    return p;
  });
}

json to_json(const PlantConfig& c) {
  return {{"backlash_width", c.backlash_width}, {"stretch_gain", c.stretch_gain}, {"coupling_56", c.coupling_56},
          {"coupling_45", c.coupling_45},       {"noise_sd", c.noise_sd},         {"bias", c.bias},
          {"seed", c.seed}};
}

PlantConfig plant_from_json(const json& j, PlantConfig c) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "standard") return PlantConfig::standard();
    if (name == "identity") return PlantConfig::identity();
    throw Error(Errc::parse, "unknown plant preset '" + name + "'");
  }
  check_keys(j, "plant",
             {"preset", "backlash_width", "stretch_gain", "coupling_56", "coupling_45", "noise_sd", "bias", "seed"});
  if (j.contains("preset")) c = plant_from_json(j.at("preset"), c);
  return parsing("plant", [&] {
    read(j, "backlash_width", c.backlash_width);
    read(j, "stretch_gain", c.stretch_gain);
    read(j, "coupling_56", c.coupling_56);
    read(j, "coupling_45", c.coupling_45);
    read(j, "noise_sd", c.noise_sd);
    read(j, "bias", c.bias);
    read(j, "seed", c.seed);
    return c;
  });
}

json to_json(const Workspace& w) { return {{"lo", vec3_json(w.lo)}, {"hi", vec3_json(w.hi)}}; }

Workspace workspace_from_json(const json& j, Workspace w) {
  check_keys(j, "workspace", {"lo", "hi"});
  return parsing("workspace", [&] {
    if (j.contains("lo")) w.lo = vec3_from(j.at("lo"));
    if (j.contains("hi")) w.hi = vec3_from(j.at("hi"));
    return w;
  });
}

json to_json(const CameraModel& c) {
  const Mat3 r = c.camera_from_robot.rotation();
  json rot = json::array();
  for (int i = 0; i < 3; ++i) rot.push_back({r(i, 0), r(i, 1), r(i, 2)});
  return {{"rotation", rot},
          {"translation", vec3_json(c.camera_from_robot.translation())},
          {"sphere_radius", c.sphere_radius},
          {"samples_per_sphere", c.samples_per_sphere}};
}

CameraModel camera_from_json(const json& j, CameraModel c) {
  check_keys(j, "camera", {"rotation", "translation", "sphere_radius", "samples_per_sphere"});
  return parsing("camera", [&] {
    if (j.contains("rotation")) {
      const auto rows = j.at("rotation").get<std::vector<std::vector<double>>>();
      if (rows.size() != 3) throw Error(Errc::parse, "camera rotation must be 3x3");
      Mat3 r;
      for (int i = 0; i < 3; ++i) {
        if (rows[static_cast<std::size_t>(i)].size() != 3) throw Error(Errc::parse, "camera rotation must be 3x3");
        for (int k = 0; k < 3; ++k) r(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      }
      if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 || r.determinant() < 0.0)
        throw Error(Errc::parse, "camera rotation is not a proper rotation");
      c.camera_from_robot.linear() = r;
    }
    if (j.contains("translation")) c.camera_from_robot.translation() = vec3_from(j.at("translation"));
    read(j, "sphere_radius", c.sphere_radius);
    read(j, "samples_per_sphere", c.samples_per_sphere);
    return c;
  });
}

json to_json(const PickPlaceOptions& o) {
  return {{"horizontal_waypoints", o.horizontal_waypoints},
          {"vertical_waypoints", o.vertical_waypoints},
          {"roll_range", o.roll_range},
          {"wrist_range", o.wrist_range},
          {"min_swing", o.min_swing}};
}

PickPlaceOptions motion_from_json(const json& j, PickPlaceOptions o) {
  check_keys(j, "motion", {"horizontal_waypoints", "vertical_waypoints", "roll_range", "wrist_range", "min_swing"});
  return parsing("motion", [&] {
    read(j, "horizontal_waypoints", o.horizontal_waypoints);
    read(j, "vertical_waypoints", o.vertical_waypoints);
    read(j, "roll_range", o.roll_range);
    read(j, "wrist_range", o.wrist_range);
    read(j, "min_swing", o.min_swing);
    return o;
  });
}

json to_json(const TrainHyper& h) {
  return {{"learning_rate", h.learning_rate}, {"epochs", h.epochs}, {"batch", h.batch}, {"decay", h.decay}};
}

TrainHyper training_from_json(const json& j, TrainHyper h) {
  check_keys(j, "training", {"learning_rate", "epochs", "batch", "decay"});
  return parsing("training", [&] {
    read(j, "learning_rate", h.learning_rate);
    read(j, "epochs", h.epochs);
    read(j, "batch", h.batch);
    read(j, "decay", h.decay);
    return h;
  });
}

void RunConfig::validate() const {
  kinematics.validate();
  plant.validate();
  workspace.validate();
  workspace.check_reachable(kinematics);
  if (camera.samples_per_sphere < 4) throw Error(Errc::invalid_argument, "samples_per_sphere must be >= 4");
  if (!(camera.sphere_radius > 0.0)) throw Error(Errc::invalid_argument, "sphere_radius must be positive");
  if (motion.horizontal_waypoints < 1 || motion.vertical_waypoints < 1)
    throw Error(Errc::invalid_argument, "motion needs at least one waypoint per segment");
  if (!(training.learning_rate > 0.0) || training.epochs < 1 || training.batch < 1 || !(training.decay > 0.0))
    throw Error(Errc::invalid_argument, "training hyperparameters must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(Errc::invalid_argument, "alpha must lie in (0, 1]");
  if (iterations < 1) throw Error(Errc::invalid_argument, "iterations must be >= 1");
}

std::string RunConfig::hash() const { return fnv1a_hex(to_json(*this).dump()); }

json to_json(const RunConfig& c) {
  return {{"kinematics", to_json(c.kinematics)},
          {"plant", to_json(c.plant)},
          {"workspace", to_json(c.workspace)},
          {"camera", to_json(c.camera)},
          {"motion", to_json(c.motion)},
          {"training", to_json(c.training)},
          {"controller", {{"alpha", c.alpha}, {"iterations", c.iterations}}}};
}

RunConfig config_from_json(const json& j) {
  check_keys(j, "config", {"kinematics", "plant", "workspace", "camera", "motion", "training", "controller"});
  RunConfig c;
  if (j.contains("kinematics")) c.kinematics = kinematics_from_json(j.at("kinematics"));
  if (j.contains("plant")) c.plant = plant_from_json(j.at("plant"));
  if (j.contains("workspace")) c.workspace = workspace_from_json(j.at("workspace"));
  if (j.contains("camera")) c.camera = camera_from_json(j.at("camera"));
  if (j.contains("motion")) c.motion = motion_from_json(j.at("motion"));
  if (j.contains("training")) c.training = training_from_json(j.at("training"));
  if (j.contains("controller")) {
    const auto& k = j.at("controller");
    check_keys(k, "controller", {"alpha", "iterations"});
    parsing("controller", [&] {
      read(k, "alpha", c.alpha);
      read(k, "iterations", c.iterations);
      return 0;
    });
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::parse, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace cablecal
