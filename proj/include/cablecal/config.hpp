#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "cablecal/bench.hpp"
#include "cablecal/models.hpp"

namespace cablecal {

/// Everything an experiment needs besides its flags. Every section is
/// optional in JSON; missing keys keep their defaults, unknown keys are
/// rejected.
struct RunConfig {
  KinematicParams kinematics;
  PlantConfig plant = PlantConfig::standard();
  Workspace workspace;
  CameraModel camera = CameraModel::standard();
  PickPlaceOptions motion;
  TrainHyper training;
  double alpha = 0.5;
  int iterations = 3;

  void validate() const;
  /// 16-hex-digit digest of the canonical JSON form.
  std::string hash() const;
};

/// FNV-1a 64-bit digest as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

nlohmann::json to_json(const KinematicParams& p);
KinematicParams kinematics_from_json(const nlohmann::json& j, KinematicParams base = {});
nlohmann::json to_json(const PlantConfig& c);
PlantConfig plant_from_json(const nlohmann::json& j, PlantConfig base = PlantConfig::standard());
nlohmann::json to_json(const Workspace& w);
Workspace workspace_from_json(const nlohmann::json& j, Workspace base = {});
nlohmann::json to_json(const CameraModel& c);
CameraModel camera_from_json(const nlohmann::json& j, CameraModel base = CameraModel::standard());
nlohmann::json to_json(const PickPlaceOptions& o);
PickPlaceOptions motion_from_json(const nlohmann::json& j, PickPlaceOptions base = {});
nlohmann::json to_json(const TrainHyper& h);
TrainHyper training_from_json(const nlohmann::json& j, TrainHyper base = {});

nlohmann::json to_json(const RunConfig& c);
RunConfig config_from_json(const nlohmann::json& j);
/// Reads and validates a config file; Error(io) or Error(parse) on failure.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace cablecal
