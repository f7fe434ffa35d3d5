#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cablecal/config.hpp"

using namespace cablecal;
using nlohmann::json;

TEST_CASE("default config survives a JSON roundtrip") {
  const RunConfig a;
  const RunConfig b = config_from_json(to_json(a));
  CHECK(to_json(b) == to_json(a));
  CHECK(b.hash() == a.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("missing sections keep their defaults") {
  const RunConfig c = config_from_json(json::parse(R"({"plant": {"coupling_56": 0.2}, "training": {"epochs": 7}})"));
  CHECK(c.plant.coupling_56 == 0.2);
  CHECK(c.plant.backlash_width == PlantConfig::standard().backlash_width);
  CHECK(c.training.epochs == 7);
  CHECK(c.training.batch == TrainHyper{}.batch);
  CHECK(c.kinematics.l_tool == KinematicParams{}.l_tool);
  CHECK(c.hash() != RunConfig{}.hash());
}

TEST_CASE("plant presets") {
  CHECK(plant_from_json(json("identity")).hash() == PlantConfig::identity().hash());
  const auto p = plant_from_json(json::parse(R"({"preset": "identity", "bias": [0, 0, 0.005, 0, 0, 0]})"));
  CHECK(p.bias[2] == 0.005);
  CHECK(p.backlash_width[5] == 0.0);
  CHECK_THROWS_AS(plant_from_json(json("nonsense")), Error);
}

TEST_CASE("camera pose roundtrip") {
  const CameraModel cam = CameraModel::looking_at(Vec3(0, 0, -0.4), Vec3(1, 1, 1), 0.8);
  const CameraModel back = camera_from_json(to_json(cam));
  CHECK((back.camera_from_robot.matrix() - cam.camera_from_robot.matrix()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS(camera_from_json(json::parse(R"({"rotation": [[2,0,0],[0,1,0],[0,0,1]]})")));
}

TEST_CASE("invalid configs are rejected") {
  auto code = [](const char* text) {
    try {
      config_from_json(json::parse(text));
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::io;  // sentinel: nothing thrown
  };
  CHECK(code(R"({"plants": {}})") == Errc::parse);
  CHECK(code(R"({"plant": {"width": 1}})") == Errc::parse);
  CHECK(code(R"({"training": {"epochs": "many"}})") == Errc::parse);
  CHECK(code(R"({"workspace": {"lo": [0, 0]}})") == Errc::parse);
  CHECK(code(R"({"plant": {"coupling_56": 1.5}})") == Errc::invalid_argument);
  CHECK(code(R"({"controller": {"alpha": 0}})") == Errc::invalid_argument);
  CHECK(code(R"({"workspace": {"lo": [-0.5, -0.5, -0.6], "hi": [0.5, 0.5, 0.0]}})") == Errc::workspace_unreachable);
}

TEST_CASE("load_config reports missing and malformed files") {
  const auto dir = std::filesystem::temp_directory_path();
  CHECK_THROWS_AS(load_config(dir / "cablecal-no-such-config.json"), Error);
  const auto bad = dir / "cablecal-bad-config.json";
  std::ofstream(bad) << "{ not json";
  try {
    load_config(bad);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::parse);
  }
  std::filesystem::remove(bad);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}
