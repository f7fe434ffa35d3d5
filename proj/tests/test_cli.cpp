#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::path(CABLECAL_TEST_WORKDIR) / "cli";

int run(const std::string& args) {
  fs::create_directories(kWork);
  const std::string cmd = "cd '" + kWork.string() + "' && '" + CABLECAL_CLI + "' " + args + " > last.log 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("collect writes the requested number of records and a manifest") {
  REQUIRE(run("collect --protocol random --n 400 --seed 7 --out c/random.jsonl") == 0);
  CHECK(line_count(kWork / "c/random.jsonl") == 400);
  const json m = json::parse(slurp(kWork / "c/random.jsonl.manifest.json"));
  CHECK(m.at("command") == "collect");
  CHECK(m.at("seeds").at("global") == 7);
  CHECK(m.at("outputs").size() == 1);
  REQUIRE(run("collect --protocol pick --n 180 --seed 7 --out c/pick.jsonl") == 0);
  CHECK(line_count(kWork / "c/pick.jsonl") == 180);
}

TEST_CASE("default output names carry study, seed, and config hash") {
  REQUIRE(run("collect --protocol random --n 20 --seed 11 --out-dir named") == 0);
  bool found = false;
  for (const auto& e : fs::directory_iterator(kWork / "named")) {
    const auto name = e.path().filename().string();
    if (name.rfind("collect-random-s11-", 0) == 0 && e.path().extension() == ".jsonl") found = true;
  }
  CHECK(found);
}

TEST_CASE("exit codes") {
  CHECK(run("collect --protocol pick --n 0") == 2);
  CHECK(run("collect --protocol sideways --n 10") == 2);
  CHECK(run("") == 2);
  CHECK(run("train --data missing.jsonl") == 3);
  REQUIRE(run("collect --protocol random --n 50 --out e/d.jsonl") == 0);
  CHECK(run("train --data e/d.jsonl --direction inverse --input est") == 2);
  std::ofstream(kWork / "e/bad.json") << "{ nope";
  CHECK(run("inspect-linear --model e/bad.json") == 3);
  CHECK(run("--help") == 0);
  // the default plant drives the physical wrist past its limits on this protocol
  CHECK(run("collect --protocol random --n 600 --seed 4 --mode fiducial --out e/f.jsonl") == 4);
  CHECK(line_count(kWork / "e/f.jsonl") < 600);
}

TEST_CASE("linear model on identity-plant data has no validation error") {
  REQUIRE(run("collect --protocol pick --n 300 --seed 3 --plant identity --out i/d.jsonl") == 0);
  REQUIRE(run("train --data i/d.jsonl --arch linear --horizon 0 --out i/m.json") == 0);
  const json s = json::parse(slurp(kWork / "i/m.json.summary.json"));
  CHECK(s.at("val_mse").get<double>() < 1e-6);
}

TEST_CASE("ensemble flag writes every member") {
  REQUIRE(run("collect --protocol pick --n 200 --seed 4 --out en/d.jsonl") == 0);
  REQUIRE(run("train --data en/d.jsonl --hidden 4 --epochs 1 --ensemble 10 --jobs 2 --out en/m.json") == 0);
  const json m = json::parse(slurp(kWork / "en/m.json"));
  CHECK(m.at("kind") == "ensemble");
  CHECK(m.at("members").size() == 10);
}

TEST_CASE("ablation table has one row per horizon") {
  REQUIRE(run("collect --protocol pick --n 200 --seed 5 --out ab/d.jsonl") == 0);
  REQUIRE(run("ablate --data ab/d.jsonl --arch linear --horizons 0,1,2,4,6 --repeats 5 --out ab/t.csv") == 0);
  CHECK(line_count(kWork / "ab/t.csv") == 6);
}

TEST_CASE("study, fit-sphere, and register produce reports") {
  REQUIRE(run("study measurement --noise 0.00067 --trials 100 --out st/m") == 0);
  const json m = json::parse(slurp(kWork / "st/m.json"));
  CHECK(m.at("joints").size() == 6);
  CHECK(slurp(kWork / "last.log").find("[deg]") != std::string::npos);

  {
    std::ofstream pts(kWork / "st/points.csv");
    pts.precision(17);
    pts << "x,y,z\n";
    for (int i = 0; i < 50; ++i) {
      const double t = 0.3 * i, p = 0.17 * i;
      pts << 0.01 + 0.005 * std::cos(t) * std::sin(p) << ',' << -0.02 + 0.005 * std::sin(t) * std::sin(p) << ','
          << 0.3 + 0.005 * std::cos(p) << '\n';
    }
  }
  REQUIRE(run("fit-sphere --points st/points.csv --out st/s.json") == 0);
  const json s = json::parse(slurp(kWork / "st/s.json"));
  CHECK(s.at("radius").get<double>() == doctest::Approx(0.005).epsilon(1e-9));

  {
    std::ofstream pairs(kWork / "st/pairs.csv");
    const double pts[4][3] = {{0, 0, 0}, {0.1, 0, 0}, {0, 0.1, 0}, {0, 0, 0.1}};
    for (const auto& p : pts) pairs << p[0] << ',' << p[1] << ',' << p[2] << ',' << -p[1] + 0.5 << ',' << p[0] << ','
                                    << p[2] - 0.2 << '\n';
  }
  REQUIRE(run("register --pairs st/pairs.csv --out st/r.json") == 0);
  CHECK(json::parse(slurp(kWork / "st/r.json")).at("residual_rms").get<double>() < 1e-12);
}

TEST_CASE("re-running a pipeline reproduces every output byte for byte") {
  const char* steps[] = {
      "collect --protocol pick --n 300 --seed 9 --out {d}/train.jsonl",
      "train --data {d}/train.jsonl --hidden 8 --epochs 3 --seed 9 --jobs 2 --ensemble 2 --out {d}/m.json",
      "track --controller forward --model {d}/m.json --n 80 --seed 10 --out {d}/track.csv",
      "peg --controller passthrough --runs 1 --seed 10 --out {d}/peg.csv",
  };
  for (const char* dir : {"det1", "det2"})
    for (std::string s : steps) {
      for (auto p = s.find("{d}"); p != std::string::npos; p = s.find("{d}")) s.replace(p, 3, dir);
      REQUIRE(run(s) == 0);
    }
  int compared = 0;
  for (const auto& e : fs::directory_iterator(kWork / "det1")) {
    const auto name = e.path().filename().string();
    if (name.find(".manifest.") != std::string::npos) continue;
    CHECK_MESSAGE(slurp(e.path()) == slurp(kWork / "det2" / name), name);
    ++compared;
  }
  CHECK(compared >= 6);
}
