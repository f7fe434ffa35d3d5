// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. Expensive models are trained once
// and shared between the criteria that need them.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cablecal/bench.hpp"
#include "cablecal/lasso.hpp"
#include "oracles.hpp"

using namespace cablecal;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kDeg = 180.0 / std::numbers::pi;

const KinematicParams kp;
const Workspace ws = Workspace::standard();

// Hidden width used for every recurrent model in this suite.
constexpr int kHidden = 64;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

Dataset collect_run(const std::vector<JointConfig>& cmds, const PlantConfig& base, std::uint64_t plant_seed,
                    const std::string& protocol) {
  PlantConfig cfg = base;
  cfg.seed = plant_seed;
  Plant plant(cfg, kp);
  CollectOptions o;
  o.protocol = protocol;
  Dataset ds = collect(cmds, plant, o);
  if (!ds.meta.complete) throw Error(Errc::limit_violation, ds.meta.abort_reason);
  return ds;
}

Dataset pick_run(int n, std::uint64_t seed, const PlantConfig& plant = PlantConfig::standard()) {
  return collect_run(sample_pick_place_waypoints(ws, n, kp, seed).configs, plant, derive_seed(seed, 99), "pick");
}

Dataset random_run(int n, std::uint64_t seed, const PlantConfig& plant = PlantConfig::standard()) {
  return collect_run(sample_random_trajectory(ws, n, kp, seed), plant, derive_seed(seed, 99), "random");
}

ModelSpec rnn_spec() {
  ModelSpec s;
  s.arch = Arch::rnn;
  s.input = InputFormat::cmd;
  s.output = OutputFormat::delta;
  s.horizon = 4;
  s.hidden = kHidden;
  return s;
}

std::uint64_t seed_for(const char* stream, int k) {
  std::uint64_t h = 0;
  for (const char* c = stream; *c; ++c) h = h * 131 + static_cast<unsigned char>(*c);
  return derive_seed(h, static_cast<std::uint64_t>(k));
}

/// Forward models trained on the pick and random protocols for one seed.
struct SeedModels {
  std::shared_ptr<const Ensemble> pick, random;
  double pick_train_seconds = 0.0;
};

std::map<int, SeedModels> g_models;

const SeedModels& models_for(int k) {
  auto it = g_models.find(k);
  if (it != g_models.end()) return it->second;
  const ModelSpec spec = rnn_spec();
  TrainHyper h;
  h.seed = seed_for("init", k);
  SeedModels m;
  {
    const auto tr = make_examples(pick_run(1800, seed_for("pick-train", k)), spec.example_options());
    const auto va = make_examples(pick_run(180, seed_for("pick-val", k)), spec.example_options());
    const auto t0 = Clock::now();
    m.pick = std::make_shared<Ensemble>(std::vector<Model>{train(spec, tr, va, h)});
    m.pick_train_seconds = seconds_since(t0);
  }
  {
    const auto tr = make_examples(random_run(4000, seed_for("random-train", k)), spec.example_options());
    const auto va = make_examples(random_run(400, seed_for("random-val", k)), spec.example_options());
    m.random = std::make_shared<Ensemble>(std::vector<Model>{train(spec, tr, va, h)});
  }
  return g_models.emplace(k, std::move(m)).first->second;
}

ControllerConfig forward_with(std::shared_ptr<const Ensemble> model) {
  ControllerConfig c;
  c.kind = ControllerKind::forward_refine;
  c.alpha = 0.5;
  c.iterations = 3;
  c.model = std::move(model);
  return c;
}

// ---- criteria ----

Outcome kinematic_roundtrip() {
  const auto t0 = Clock::now();
  const CameraModel cam = CameraModel::standard();
  Rng rng = make_rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Vec6 q;
    for (int j = 0; j < 6; ++j) q[j] = uniform(rng, kp.joint_limits[j].first, kp.joint_limits[j].second);
    const JointConfig truth(q, Role::physical);
    forward_kinematics(truth, kp);
    const auto est = estimate_configuration(synthesize_frame(truth, kp, cam, {}, derive_seed(2024, i)), kp, cam);
    worst = std::max(worst, (est.q.q - q).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-7 && secs < 10.0,
          "max |estimate - truth| " + fmt(worst) + " over 1000 configs (< 1e-7), " + fmt(secs) + " s (< 10 s)"};
}

MeasurementStudy g_study;

Outcome sphere_fit() {
  Rng rng = make_rng(31);
  double exact = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec3 c(uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, 0.5, 1.2));
    const double r = uniform(rng, 0.003, 0.02);
    std::vector<Vec3> pts;
    const int n = 4 + static_cast<int>(uniform(rng, 1.0, 300.0));
    for (int k = 0; k < n; ++k) pts.push_back(c + r * uniform_direction(rng));
    const Sphere s = fit_sphere(pts);
    exact = std::max({exact, (s.center - c).norm(), std::abs(s.radius - r)});
  }
  MeasurementStudyOptions clean;
  clean.point_max = 0.0;
  clean.trials = 120;
  clean.seed = 5;
  const double frame_exact = measurement_noise_study(kp, clean).sphere.rms;

  MeasurementStudyOptions noisy;
  noisy.point_max = 0.00067;
  noisy.trials = 120;
  noisy.seed = 5;
  g_study = measurement_noise_study(kp, noisy);
  const double rms_mm = g_study.sphere.rms * 1000.0;
  const bool pass = exact < 1e-9 && frame_exact < 1e-9 && rms_mm >= 0.15 && rms_mm <= 0.6;
  return {pass, "noiseless max error " + fmt(std::max(exact, frame_exact)) + " m (< 1e-9); 0.67 mm noise, 120 trials: "
                    "center RMS " + fmt(rms_mm) + " mm (in [0.15, 0.6]), mean " +
                    fmt(g_study.sphere.mean * 1000.0) + " +/- " + fmt(g_study.sphere.sd * 1000.0) + " mm"};
}

Outcome noise_propagation() {
  if (g_study.trials == 0) {
    MeasurementStudyOptions noisy;
    noisy.trials = 120;
    noisy.seed = 5;
    g_study = measurement_noise_study(kp, noisy);
  }
  bool pass = true;
  std::string d = "wrist joint RMS";
  for (int j = 3; j < 6; ++j) {
    const double deg = g_study.joints[j].rms * kDeg;
    pass = pass && deg <= 1.0;
    d += " q" + std::to_string(j + 1) + " " + fmt(deg) + " deg";
  }
  return {pass, d + " (each <= 1.0 deg)"};
}

Outcome gradients() {
  const Dataset ds = pick_run(60, 77);
  auto check = [&](Arch arch, int horizon) {
    ModelSpec s;
    s.arch = arch;
    s.horizon = horizon;
    s.hidden = 8;
    s.layers = 2;
    return gradient_check(s, make_examples(ds, s.example_options()).slice(0, 16), 1e-5, 3);
  };
  const double lin = check(Arch::linear, 4), ff = check(Arch::ff, 4), rnn = check(Arch::rnn, 3);
  return {lin < 1e-8 && ff < 1e-5 && rnn < 1e-4, "max relative error linear " + fmt(lin) + " (< 1e-8), ff " +
                                                     fmt(ff) + " (< 1e-5), rnn over 4 steps " + fmt(rnn) +
                                                     " (< 1e-4)"};
}

Outcome lasso_oracle() {
  Rng rng = make_rng(4242);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 25 + 4 * trial, p = 2 + trial % 7, k = 1 + trial % 3;
    const Eigen::MatrixXd x = oracle::gaussian(rng, n, p);
    const Eigen::MatrixXd y = x * oracle::gaussian(rng, p, k) + 0.5 * oracle::gaussian(rng, n, k);
    const double lambda = 0.25 + 0.8 * trial;
    LassoOptions o;
    o.lambda = lambda;
    o.tolerance = 1e-12;
    worst = std::max(worst, (lasso_fit(x, y, o).a - oracle::fista(x, y, lambda)).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-5, "max |coordinate descent - proximal gradient| " + fmt(worst) + " over 20 instances (< 1e-5)"};
}

Outcome calibration_efficacy() {
  const SeedModels& m = models_for(0);
  const ModelSpec spec = rnn_spec();
  const auto test = make_examples(pick_run(1800, seed_for("pick-test", 0)), spec.example_options());
  const double mse = prediction_mse(m.pick->predict_rows(test.x), test);
  const double base = baseline_mse(test);
  const double reduction = 1.0 - mse / base;
  return {reduction >= 0.90 && m.pick_train_seconds < 300.0,
          "test wrist MSE " + fmt(mse) + " vs uncalibrated " + fmt(base) + " rad^2: reduction " +
              fmt(100.0 * reduction, 4) + "% (>= 90%); training " + fmt(m.pick_train_seconds) + " s (< 300 s)"};
}

Outcome horizon_shape() {
  const ModelSpec spec = rnn_spec();
  const Dataset tr = pick_run(1800, seed_for("pick-train", 0));
  const Dataset va = pick_run(600, seed_for("ablation-val", 0));
  TrainHyper h;
  h.seed = seed_for("ablation", 0);
  const auto rows = horizon_ablation(spec, tr, va, {0, 1, 4}, 5, h);
  const double m0 = rows[0].mean_mse, m1 = rows[1].mean_mse, m4 = rows[2].mean_mse;
  std::string d;
  for (const auto& r : rows)
    d += "H=" + std::to_string(r.horizon) + " " + fmt(r.mean_mse) + " +/- " + fmt(r.sd_mse) + "; ";
  return {m4 <= m1 && m1 <= m0, d + "need H4 <= H1 <= H0 (5 seeds each)"};
}

Outcome tracking_ordering() {
  int ok = 0;
  std::string d;
  for (int k = 0; k < 5; ++k) {
    const SeedModels& m = models_for(k);
    auto targets = sample_pick_place_waypoints(ws, 600, kp, seed_for("track", k)).configs;
    for (auto& t : targets) t.role = Role::desired;
    auto mean_err = [&](const ControllerConfig& c) {
      PlantConfig cfg = PlantConfig::standard();
      cfg.seed = seed_for("track-plant", k);
      Plant plant(cfg, kp);
      return tracking_metrics(track_trajectory(c, plant, targets)).mean;
    };
    const double pass = mean_err(ControllerConfig{});
    const double rnd = mean_err(forward_with(m.random));
    const double pick = mean_err(forward_with(m.pick));
    const bool good = pick <= rnd && rnd <= pass && pick <= pass / 3.0;
    ok += good;
    d += "seed " + std::to_string(k) + ": " + fmt(pick) + " <= " + fmt(rnd) + " <= " + fmt(pass) + " mm" +
         (good ? "" : " (violated)") + "; ";
  }
  return {ok >= 4, d + std::to_string(ok) + "/5 seeds satisfy pick <= random <= passthrough and pick <= passthrough/3 "
                                            "(need >= 4)"};
}

Outcome peg_ordering() {
  const SeedModels& m = models_for(0);
  PegOptions o;
  o.runs = 10;
  o.seed = seed_for("peg", 0);
  const PegBoard board = PegBoard::standard(ws);
  const PegReport pass = peg_transfer_sim(ControllerConfig{}, PlantConfig::standard(), kp, board, o);
  const PegReport cal = peg_transfer_sim(forward_with(m.pick), PlantConfig::standard(), kp, board, o);
  const PegReport ideal = peg_transfer_sim(ControllerConfig{}, PlantConfig::identity(), kp, board, o);
  const double gap = cal.success_rate() - pass.success_rate();
  return {gap >= 0.30 && ideal.success_rate() == 1.0,
          "success forward-refine " + fmt(100.0 * cal.success_rate()) + "% (" + std::to_string(cal.success) + "/" +
              std::to_string(cal.attempts.size()) + ") vs passthrough " + fmt(100.0 * pass.success_rate()) + "% (" +
              std::to_string(pass.success) + "/" + std::to_string(pass.attempts.size()) + "), gap " +
              fmt(100.0 * gap) + " pp (>= 30); identity plant " + fmt(100.0 * ideal.success_rate()) + "% (= 100%)"};
}

Outcome structure_recovery() {
  ModelSpec spec;
  spec.arch = Arch::linear;
  spec.direction = Direction::inverse;
  spec.output = OutputFormat::abs;
  spec.joints = JointSet::all;
  spec.horizon = 2;
  const Dataset tr = random_run(4000, seed_for("linear-train", 0));
  const Model m = train(spec, make_examples(tr, spec.example_options()), {}, {});
  const LinearInspection ins = inspect_linear_model(m);
  // ins.grids[o](lag, input joint), joints are 1..6 in order
  double q56 = 0.0;
  for (Eigen::Index k = 0; k < ins.grids[4].rows(); ++k)
    q56 = std::max({q56, std::abs(ins.grids[4](k, 5)), std::abs(ins.grids[5](k, 4))});
  double arm_cross = 0.0;
  for (int o = 0; o < 3; ++o)
    for (Eigen::Index k = 0; k < ins.grids[static_cast<std::size_t>(o)].rows(); ++k)
      for (int j = 0; j < 6; ++j)
        if (j != o) arm_cross = std::max(arm_cross, std::abs(ins.grids[static_cast<std::size_t>(o)](k, j)));
  return {q56 > 0.1 && arm_cross < 0.05, "max |q5<->q6 cross weight| " + fmt(q56) + " (> 0.1); max cross weight "
                                         "into q1-q3 grids " + fmt(arm_cross) + " (< 0.05)"};
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome cli_determinism() {
  const fs::path root = fs::path(CABLECAL_ACCEPTANCE_WORKDIR) / "acceptance-determinism";
  fs::remove_all(root);
  const std::vector<std::string> pipeline = {
      "collect --protocol pick --n 600 --seed 3 --out {d}/pick.jsonl",
      "collect --protocol pick --n 600 --seed 4 --mode fiducial --noise 0.00067 --out {d}/fiducial.jsonl",
      "collect --protocol random --n 600 --seed 4 --out {d}/random.jsonl",
      "train --data {d}/pick.jsonl --hidden 16 --epochs 5 --ensemble 3 --seed 5 --jobs 2 --out {d}/rnn.json",
      "train --data {d}/random.jsonl --arch linear --direction inverse --output abs --joints all --horizon 2 "
      "--out {d}/linear.json",
      "ablate --data {d}/pick.jsonl --arch ff --hidden 8 --epochs 3 --horizons 0,1,2 --repeats 2 --seed 6 "
      "--out {d}/ablate.csv",
      "track --controller forward --model {d}/rnn.json --n 200 --seed 7 --out {d}/track.csv",
      "track --controller inverse --model {d}/linear.json --n 200 --seed 7 --out {d}/track-inverse.csv",
      "peg --controller forward --model {d}/rnn.json --runs 1 --seed 8 --out {d}/peg.csv",
      "study measurement --trials 100 --seed 9 --jobs 2 --out {d}/study",
      "study errors --seed 9 --out {d}/errors",
      "inspect-linear --model {d}/linear.json --out {d}/inspect.csv",
  };
  for (const char* dir : {"a", "b"}) {
    for (std::string step : pipeline) {
      const std::string d = (root / dir).string();
      for (auto p = step.find("{d}"); p != std::string::npos; p = step.find("{d}")) step.replace(p, 3, d);
      fs::create_directories(root / dir);
      const int rc = shell(std::string("'") + CABLECAL_CLI + "' " + step + " > '" + (root / dir / "log.txt").string() +
                           "' 2>&1");
      if (rc != 0) return {false, "'" + step + "' exited with " + std::to_string(rc)};
    }
  }
  int files = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    const std::string name = e.path().filename().string();
    if (name.find(".manifest.") != std::string::npos || name == "log.txt") continue;
    ++files;
    if (slurp(e.path()) != slurp(root / "b" / name)) return {false, name + " differs between identical runs"};
  }
  return {files >= 15, std::to_string(files) + " output files from " + std::to_string(pipeline.size()) +
                           " CLI steps identical across two runs"};
}

}  // namespace

// Optional arguments select criteria by number; default runs all.
int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "kinematic roundtrip", kinematic_roundtrip},
      {2, "sphere-fit exactness and noise level", sphere_fit},
      {3, "noise propagation to joints", noise_propagation},
      {4, "gradient correctness", gradients},
      {5, "LASSO oracle equivalence", lasso_oracle},
      {6, "calibration efficacy", calibration_efficacy},
      {7, "horizon ablation shape", horizon_shape},
      {8, "tracking ordering", tracking_ordering},
      {9, "peg-transfer ordering", peg_ordering},
      {10, "structure recovery", structure_recovery},
      {11, "CLI determinism", cli_determinism},
  };
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " ("
              << fmt(seconds_since(t0)) << " s)" << std::endl;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
