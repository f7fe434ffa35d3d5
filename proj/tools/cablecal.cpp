// Command-line front end: every subcommand reads SI files, writes SI files
// plus a run manifest, and prints a degree/millimeter summary.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cablecal/bench.hpp"
#include "cablecal/config.hpp"
#include "cablecal/control.hpp"
#include "cablecal/error.hpp"
#include "cablecal/fiducial.hpp"
#include "cablecal/models.hpp"

namespace fs = std::filesystem;
using namespace cablecal;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitCompute = 4;
constexpr double kDeg = 180.0 / std::numbers::pi;
constexpr const char* kToolVersion = "cablecal 0.1.0";

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir = ".";
  std::string command_line;
};

/// Shared plumbing of one subcommand invocation: configuration, output
/// naming, and the manifest written next to the primary artifact.
class Run {
 public:
  Run(const Globals& g, std::string command) : g_(g), command_(std::move(command)) {
    cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
    if (g.config_path.empty()) cfg.validate();
    if (!g.config_path.empty()) inputs_.push_back(g.config_path);
    start_ = std::chrono::steady_clock::now();
    started_at_ = std::time(nullptr);
  }

  RunConfig cfg;

  std::uint64_t seed() const { return g_.seed; }
  int jobs() const { return g_.jobs; }

  /// `<out-dir>/<stem>-s<seed>-<config hash prefix><ext>` unless overridden.
  fs::path output(const std::string& stem, const std::string& ext, const std::string& override_path = {}) const {
    if (!override_path.empty()) return override_path;
    return fs::path(g_.out_dir) / (stem + "-s" + std::to_string(g_.seed) + "-" + cfg.hash().substr(0, 8) + ext);
  }

  void input(const fs::path& p) { inputs_.push_back(p.string()); }
  void seed_entry(const std::string& name, std::uint64_t v) { seeds_[name] = v; }

  void write(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) {
      std::error_code ec;
      fs::create_directories(p.parent_path(), ec);
      if (ec) throw Error(Errc::io, "cannot create " + p.parent_path().string());
    }
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + p.string());
    out << content;
    out.close();
    if (!out) throw Error(Errc::io, "failed writing " + p.string());
    outputs_.push_back(p.string());
  }

  void write_json(const fs::path& p, const json& j) { write(p, j.dump(2) + "\n"); }

  /// Writes `<first output>.manifest.json`.
  void finish() {
    if (outputs_.empty()) return;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&started_at_));
    json seeds = seeds_;
    seeds["global"] = g_.seed;
    const json m{{"command", command_},
                 {"command_line", g_.command_line},
                 {"config_hash", cfg.hash()},
                 {"plant_hash", cfg.plant.hash()},
                 {"seeds", seeds},
                 {"jobs", g_.jobs},
                 {"inputs", inputs_},
                 {"outputs", outputs_},
                 {"tool_version", kToolVersion},
                 {"started_at", stamp},
                 {"wall_clock_s", wall}};
    const fs::path p = outputs_.front() + ".manifest.json";
    std::ofstream out(p);
    if (!out) throw Error(Errc::io, "cannot write " + p.string());
    out << m.dump(2) << "\n";
  }

 private:
  const Globals& g_;
  std::string command_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  json seeds_ = json::object();
  std::chrono::steady_clock::time_point start_;
  std::time_t started_at_ = 0;
};

std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

Dataset load_dataset(Run& run, const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::io, "cannot open dataset " + p.string());
  run.input(p);
  return read_dataset_jsonl(in);
}

json load_json(Run& run, const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::io, "cannot open " + p.string());
  run.input(p);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::parse, p.string() + ": " + e.what());
  }
}

/// Numeric rows of a comma-separated file; a non-numeric first line is a header.
std::vector<std::vector<double>> load_csv(Run& run, const fs::path& p, std::size_t columns) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::io, "cannot open " + p.string());
  run.input(p);
  std::vector<std::vector<double>> rows;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric && rows.empty() && n == 1) continue;
    if (!numeric || row.size() != columns)
      throw Error(Errc::parse, p.string() + ":" + std::to_string(n) + ": expected " + std::to_string(columns) +
                                   " numeric columns");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<JointConfig> protocol_commands(const RunConfig& cfg, const std::string& protocol, int n,
                                           std::uint64_t seed) {
  if (protocol == "random") return sample_random_trajectory(cfg.workspace, n, cfg.kinematics, seed);
  return sample_pick_place_waypoints(cfg.workspace, n, cfg.kinematics, seed, cfg.motion).configs;
}

/// Applies a --plant preset to the run config (so output names and the
/// manifest reflect it) and returns the plant with its noise seed derived
/// from the global seed.
PlantConfig plant_for(Run& run, const std::string& preset) {
  if (!preset.empty()) run.cfg.plant = plant_from_json(json(preset));
  PlantConfig p = run.cfg.plant;
  p.seed = derive_seed(run.seed(), p.seed);
  run.seed_entry("plant", p.seed);
  return p;
}

/// Splits a dataset in time: the last `fraction` of records become validation.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double fraction) {
  const auto n = ds.records.size();
  const auto cut = static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - fraction)));
  Dataset a{{ds.records.begin(), ds.records.begin() + static_cast<std::ptrdiff_t>(cut)}, ds.meta};
  Dataset b{{ds.records.begin() + static_cast<std::ptrdiff_t>(cut), ds.records.end()}, ds.meta};
  return {a, b};
}

struct SpecFlags {
  std::string arch = "rnn", input = "cmd", output = "delta", direction = "forward", joints = "wrist";
  int horizon = 4, hidden = 256, layers = 2;
  double lambda = 1e-3;

  void add(CLI::App* sub) {
    sub->add_option("--arch", arch, "linear | ff | rnn")->check(CLI::IsMember({"linear", "ff", "rnn"}));
    sub->add_option("--input", input, "cmd | est")->check(CLI::IsMember({"cmd", "est"}));
    sub->add_option("--output", output, "abs | delta")->check(CLI::IsMember({"abs", "delta"}));
    sub->add_option("--direction", direction, "forward | inverse")->check(CLI::IsMember({"forward", "inverse"}));
    sub->add_option("--joints", joints, "wrist | all")->check(CLI::IsMember({"wrist", "all"}));
    sub->add_option("--horizon", horizon, "prior time steps in the window")->check(CLI::NonNegativeNumber);
    sub->add_option("--hidden", hidden, "hidden units")->check(CLI::PositiveNumber);
    sub->add_option("--layers", layers, "hidden layers of the feed-forward part")->check(CLI::NonNegativeNumber);
    sub->add_option("--lambda", lambda, "LASSO penalty (linear)")->check(CLI::NonNegativeNumber);
  }

  ModelSpec spec() const {
    ModelSpec s;
    s.arch = parse_arch(arch);
    s.input = parse_input_format(input);
    s.output = parse_output_format(output);
    s.direction = parse_direction(direction);
    s.joints = parse_joint_set(joints);
    s.horizon = horizon;
    s.hidden = hidden;
    s.layers = layers;
    s.lambda = lambda;
    s.validate();
    return s;
  }
};

struct HyperFlags {
  int epochs = 0, batch = 0;
  double lr = 0.0;

  void add(CLI::App* sub) {
    sub->add_option("--epochs", epochs, "training epochs (default from config)")->check(CLI::PositiveNumber);
    sub->add_option("--batch", batch, "minibatch size (default from config)")->check(CLI::PositiveNumber);
    sub->add_option("--lr", lr, "learning rate (default from config)")->check(CLI::PositiveNumber);
  }

  TrainHyper hyper(const RunConfig& cfg, std::uint64_t seed) const {
    TrainHyper h = cfg.training;
    if (epochs > 0) h.epochs = epochs;
    if (batch > 0) h.batch = batch;
    if (lr > 0.0) h.learning_rate = lr;
    h.seed = seed;
    return h;
  }
};

std::shared_ptr<const Ensemble> load_model(Run& run, const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<Ensemble>(ensemble_from_json(load_json(run, path)));
}

ControllerConfig controller_config(Run& run, const std::string& kind, const std::string& model, double alpha,
                                   int iterations) {
  ControllerConfig c;
  c.kind = parse_controller_kind(kind);
  c.alpha = alpha > 0.0 ? alpha : run.cfg.alpha;
  c.iterations = iterations > 0 ? iterations : run.cfg.iterations;
  if (c.kind != ControllerKind::passthrough && model.empty())
    throw Error(Errc::invalid_argument, "--model is required for the " + kind + " controller");
  c.model = load_model(run, model);
  c.validate();
  return c;
}

void print_summary(const TrackingSummary& s) {
  std::cout << "  samples " << s.count << "\n"
            << "  cartesian error [mm]: mean " << fixed(s.mean) << "  median " << fixed(s.median) << "  sd "
            << fixed(s.sd) << "  min " << fixed(s.min) << "  max " << fixed(s.max) << "\n  cdf:";
  for (const auto& [t, f] : s.cdf) std::cout << "  <=" << fixed(t, 1) << "mm " << fixed(100.0 * f, 1) << "%";
  std::cout << "\n";
}

// ---- subcommands ----

struct CollectFlags {
  std::string protocol, mode = "oracle", plant, out;
  int n = 0;
  double noise = 0.0;
};

void cmd_collect(const Globals& g, const CollectFlags& f) {
  Run run(g, "collect");
  const auto cmds = protocol_commands(run.cfg, f.protocol, f.n, g.seed);
  const PlantConfig pc = plant_for(run, f.plant);
  Plant plant(pc, run.cfg.kinematics);
  CollectOptions o;
  o.mode = f.mode == "oracle" ? CollectionMode::oracle : CollectionMode::fiducial;
  o.camera = run.cfg.camera;
  o.noise.point_max = f.noise;
  o.seed = derive_seed(g.seed, 2);
  o.protocol = f.protocol;
  o.workspace = run.cfg.workspace;
  const Dataset ds = collect(cmds, plant, o);
  run.seed_entry("frames", o.seed);
  std::ostringstream os;
  write_dataset_jsonl(os, ds);
  const fs::path path = run.output("collect-" + f.protocol, ".jsonl", f.out);
  run.write(path, os.str());
  run.finish();
  std::cout << "collected " << ds.size() << " records (" << f.protocol << ", " << f.mode << ") -> " << path.string()
            << "\n";
  if (!ds.meta.complete) throw Error(Errc::limit_violation, "collection aborted early: " + ds.meta.abort_reason);
}

struct TrainFlags {
  std::string data, val, out;
  double val_fraction = 0.2;
  int ensemble = 1;
  SpecFlags spec;
  HyperFlags hyper;
};

void cmd_train(const Globals& g, const TrainFlags& f) {
  Run run(g, "train");
  const ModelSpec spec = f.spec.spec();
  const Dataset all = load_dataset(run, f.data);
  Dataset train_ds, val_ds;
  if (f.val.empty()) {
    std::tie(train_ds, val_ds) = split_dataset(all, f.val_fraction);
  } else {
    train_ds = all;
    val_ds = load_dataset(run, f.val);
  }
  const auto tr = make_examples(train_ds, spec.example_options());
  const auto va = make_examples(val_ds, spec.example_options());
  const TrainHyper h = f.hyper.hyper(run.cfg, g.seed);
  const Ensemble ens = train_ensemble(spec, tr, va, h, f.ensemble, g.jobs, all.hash());
  const double val_mse = va.rows() > 0 ? prediction_mse(ens.predict_rows(va.x), va) : 0.0;
  const double base_mse = va.rows() > 0 ? baseline_mse(va) : 0.0;

  const fs::path path = run.output("model-" + spec.name(), ".json", f.out);
  run.write_json(path, f.ensemble == 1 ? to_json(ens.members().front()) : to_json(ens));
  json members = json::array();
  for (const auto& m : ens.members()) members.push_back({{"seed", m.meta().seed}, {"val_mse", m.meta().val_mse}});
  const json summary{{"spec", to_json(spec)},
                     {"train_examples", tr.rows()},
                     {"val_examples", va.rows()},
                     {"val_mse", val_mse},
                     {"baseline_mse", base_mse},
                     {"reduction", base_mse > 0.0 ? 1.0 - val_mse / base_mse : 0.0},
                     {"members", members}};
  const fs::path spath = path.string() + ".summary.json";
  run.write_json(spath, summary);
  run.finish();

  std::cout << "trained " << spec.name() << " x" << f.ensemble << " on " << tr.rows() << " windows -> "
            << path.string() << "\n";
  std::cout << std::setprecision(6) << "  val MSE " << val_mse << " (SI units^2), baseline " << base_mse << "\n";
  if (spec.joints == JointSet::wrist)
    std::cout << "  val RMSE " << fixed(std::sqrt(val_mse) * kDeg, 4) << " deg, baseline "
              << fixed(std::sqrt(base_mse) * kDeg, 4) << " deg\n";
  if (base_mse > 0.0) std::cout << "  MSE reduction " << fixed(100.0 * (1.0 - val_mse / base_mse), 2) << "%\n";
}

struct AblateFlags {
  std::string data, val, horizons = "0,1,2,4,6", out;
  double val_fraction = 0.2;
  int repeats = 5;
  SpecFlags spec;
  HyperFlags hyper;
};

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(Errc::invalid_argument, "bad horizon list entry '" + item + "'");
    }
  }
  if (out.empty()) throw Error(Errc::invalid_argument, "empty horizon list");
  return out;
}

void cmd_ablate(const Globals& g, const AblateFlags& f) {
  Run run(g, "ablate");
  const auto horizons = parse_int_list(f.horizons);
  const ModelSpec spec = f.spec.spec();
  const Dataset all = load_dataset(run, f.data);
  Dataset train_ds, val_ds;
  if (f.val.empty()) {
    std::tie(train_ds, val_ds) = split_dataset(all, f.val_fraction);
  } else {
    train_ds = all;
    val_ds = load_dataset(run, f.val);
  }
  const auto rows = horizon_ablation(spec, train_ds, val_ds, horizons, f.repeats, f.hyper.hyper(run.cfg, g.seed),
                                     g.jobs);
  std::ostringstream csv;
  write_ablation_csv(csv, rows);
  const fs::path path = run.output("ablate-" + spec.name(), ".csv", f.out);
  run.write(path, csv.str());
  json table = json::array();
  for (const auto& r : rows)
    table.push_back({{"horizon", r.horizon}, {"mean_mse", r.mean_mse}, {"sd_mse", r.sd_mse}, {"mse", r.mse}});
  run.write_json(path.string() + ".json", {{"spec", to_json(spec)}, {"repeats", f.repeats}, {"rows", table}});
  run.finish();

  std::cout << "horizon ablation (" << spec.name() << ", " << f.repeats << " repeats) -> " << path.string() << "\n";
  for (const auto& r : rows) {
    std::cout << "  H=" << r.horizon << "  mean MSE " << std::setprecision(6) << r.mean_mse << "  sd " << r.sd_mse;
    if (spec.joints == JointSet::wrist) std::cout << "  (RMSE " << fixed(std::sqrt(r.mean_mse) * kDeg, 4) << " deg)";
    std::cout << "\n";
  }
}

struct TrackFlags {
  std::string controller = "passthrough", model, protocol = "pick", plant, out;
  int n = 1000, iterations = 0;
  double alpha = 0.0;
};

void cmd_track(const Globals& g, const TrackFlags& f) {
  Run run(g, "track");
  const ControllerConfig ctrl = controller_config(run, f.controller, f.model, f.alpha, f.iterations);
  const auto targets = protocol_commands(run.cfg, f.protocol, f.n, g.seed);
  std::vector<JointConfig> desired;
  desired.reserve(targets.size());
  for (const auto& t : targets) desired.emplace_back(t.q, Role::desired);
  const PlantConfig pc = plant_for(run, f.plant);
  Plant plant(pc, run.cfg.kinematics);
  const TrackingReport report = track_trajectory(ctrl, plant, desired);
  const TrackingSummary s = tracking_metrics(report);

  std::ostringstream csv;
  write_tracking_csv(csv, report);
  const fs::path path = run.output("track-" + std::string(to_string(ctrl.kind)) + "-" + f.protocol, ".csv", f.out);
  run.write(path, csv.str());
  json summary = to_json(s);
  summary["controller"] = to_string(ctrl.kind);
  summary["clamped_count"] = report.clamped_count;
  if (ctrl.model) summary["model_spec"] = to_json(ctrl.model->spec());
  run.write_json(path.string() + ".summary.json", summary);
  run.finish();

  std::cout << "tracking (" << to_string(ctrl.kind) << ", " << f.protocol << ") -> " << path.string() << "\n";
  print_summary(s);
  Vec6 sq = Vec6::Zero();
  for (const auto& r : report.rows) sq += r.joint_err.cwiseAbs2();
  const Vec6 rmse = (sq / static_cast<double>(report.rows.size())).cwiseSqrt();
  std::cout << "  joint RMSE: q1 " << fixed(rmse[0] * kDeg) << " deg  q2 " << fixed(rmse[1] * kDeg) << " deg  q3 "
            << fixed(rmse[2] * 1000.0) << " mm  q4 " << fixed(rmse[3] * kDeg) << " deg  q5 "
            << fixed(rmse[4] * kDeg) << " deg  q6 " << fixed(rmse[5] * kDeg) << " deg\n"
            << "  clamped commands " << report.clamped_count << "\n";
}

struct PegFlags {
  std::string controller = "passthrough", model, plant, out;
  int runs = 10, iterations = 0;
  double alpha = 0.0;
};

void cmd_peg(const Globals& g, const PegFlags& f) {
  Run run(g, "peg");
  const ControllerConfig ctrl = controller_config(run, f.controller, f.model, f.alpha, f.iterations);
  const PlantConfig pc = plant_for(run, f.plant);
  PegOptions o;
  o.runs = f.runs;
  o.seed = g.seed;
  o.motion = run.cfg.motion;
  o.workspace = run.cfg.workspace;
  const PegReport r = peg_transfer_sim(ctrl, pc, run.cfg.kinematics, PegBoard::standard(run.cfg.workspace), o);
  std::ostringstream csv;
  write_peg_csv(csv, r);
  const fs::path path = run.output("peg-" + std::string(to_string(ctrl.kind)), ".csv", f.out);
  run.write(path, csv.str());
  json summary = to_json(r);
  summary["controller"] = to_string(ctrl.kind);
  summary["runs"] = f.runs;
  run.write_json(path.string() + ".summary.json", summary);
  run.finish();

  std::cout << "peg transfer (" << to_string(ctrl.kind) << ", " << f.runs << " runs) -> " << path.string() << "\n"
            << "  attempts " << r.attempts.size() << "  success " << r.success << " ("
            << fixed(100.0 * r.success_rate(), 1) << "%)  pick failures " << r.pick_failure << "  stuck " << r.stuck
            << "  falls " << r.fall << "\n  mean waypoints per transfer " << fixed(r.mean_waypoints, 1) << "\n";
}

struct StudyFlags {
  std::string kind, out;
  double noise = 0.00067, sphere_noise = 0.0, amplitude = 0.6;
  int trials = 120, n = 270;
  std::string plant;
};

void cmd_study(const Globals& g, const StudyFlags& f) {
  Run run(g, "study");
  if (f.kind != "measurement") plant_for(run, f.plant);
  const fs::path base = run.output("study-" + f.kind, "", f.out);
  if (f.kind == "measurement") {
    MeasurementStudyOptions o;
    o.point_max = f.noise;
    o.sphere_max = f.sphere_noise;
    o.trials = f.trials;
    o.seed = g.seed;
    o.workspace = run.cfg.workspace;
    o.camera = run.cfg.camera;
    o.jobs = g.jobs;
    const MeasurementStudy s = measurement_noise_study(run.cfg.kinematics, o);
    std::ostringstream csv;
    write_measurement_csv(csv, s);
    run.write(base.string() + ".csv", csv.str());
    json j = to_json(s);
    j["point_max_m"] = f.noise;
    j["sphere_max_m"] = f.sphere_noise;
    run.write_json(base.string() + ".json", j);
    run.finish();
    std::cout << "measurement noise study (" << s.trials << " trials, point noise " << fixed(f.noise * 1000.0, 2)
              << " mm, sphere noise " << fixed(f.sphere_noise * 1000.0, 2) << " mm)\n";
    std::cout << "  sphere center error [mm]: rms " << fixed(s.sphere.rms * 1000.0) << "  mean "
              << fixed(s.sphere.mean * 1000.0) << " +/- " << fixed(s.sphere.sd * 1000.0) << "\n";
    for (int j = 0; j < 6; ++j) {
      const double k = j == 2 ? 1000.0 : kDeg;
      std::cout << "  q" << (j + 1) << " [" << (j == 2 ? "mm" : "deg") << "]: rms " << fixed(s.joints[j].rms * k)
                << "  mean " << fixed(s.joints[j].mean * k) << " +/- " << fixed(s.joints[j].sd * k) << "\n";
    }
  } else if (f.kind == "errors") {
    const PlantConfig pc = plant_for(run, f.plant);
      const ErrorIdentification e = error_identification(pc, run.cfg.kinematics, f.n, g.seed, run.cfg.workspace);
    std::ostringstream csv;
    csv << std::setprecision(17) << "joint,unit,rmse_free,rmse_fixed\n";
    for (int j = 0; j < 6; ++j)
      csv << 'q' << (j + 1) << ',' << (j == 2 ? "m" : "rad") << ',' << e.rmse_free[j] << ',' << e.rmse_fixed[j]
          << '\n';
    run.write(base.string() + ".csv", csv.str());
    run.write_json(base.string() + ".json", to_json(e));
    run.finish();
    std::cout << "error identification (" << f.n << " steps)\n";
    for (int j = 0; j < 6; ++j) {
      const double k = j == 2 ? 1000.0 : kDeg;
      std::cout << "  q" << (j + 1) << " [" << (j == 2 ? "mm" : "deg") << "]: free " << fixed(e.rmse_free[j] * k)
                << "  fixed arm " << fixed(e.rmse_fixed[j] * k) << "\n";
    }
    std::cout << "  corr(dq5 error, dq6 command) " << fixed(e.corr_q5_from_q6) << "\n"
              << "  corr(dq6 error, dq5 command) " << fixed(e.corr_q6_from_q5) << "\n";
  } else {
    const PlantConfig pc = plant_for(run, f.plant);
    const double r = coupling_response(pc, run.cfg.kinematics, f.amplitude);
    run.write_json(base.string() + ".json", {{"amplitude_rad", f.amplitude}, {"max_q6_excursion_rad", r}});
    run.finish();
    std::cout << "coupling: q5 sweep of " << fixed(f.amplitude * kDeg, 1) << " deg moves q6 by up to "
              << fixed(r * kDeg) << " deg\n";
  }
}

struct FitSphereFlags {
  std::string points, frame, out;
};

json sphere_json(const Sphere& s) {
  return {{"center", {s.center.x(), s.center.y(), s.center.z()}},
          {"radius", s.radius},
          {"support_count", s.support_count},
          {"residual_rms", s.residual_rms}};
}

void print_sphere(const std::string& label, const Sphere& s) {
  std::cout << "  " << label << "center [mm] (" << fixed(s.center.x() * 1000.0) << ", "
            << fixed(s.center.y() * 1000.0) << ", " << fixed(s.center.z() * 1000.0) << ")  radius "
            << fixed(s.radius * 1000.0) << " mm  residual rms " << fixed(s.residual_rms * 1000.0, 4) << " mm  ("
            << s.support_count << " points)\n";
}

void cmd_fit_sphere(const Globals& g, const FitSphereFlags& f) {
  Run run(g, "fit-sphere");
  if (f.points.empty() == f.frame.empty())
    throw Error(Errc::invalid_argument, "give exactly one of --points or --frame");
  const fs::path path = run.output("fit-sphere", ".json", f.out);
  if (!f.points.empty()) {
    std::vector<Vec3> pts;
    for (const auto& r : load_csv(run, f.points, 3)) pts.emplace_back(r[0], r[1], r[2]);
    const Sphere s = fit_sphere(pts);
    run.write_json(path, sphere_json(s));
    run.finish();
    std::cout << "sphere fit over " << pts.size() << " points\n";
    print_sphere("", s);
    return;
  }
  std::ifstream in(f.frame);
  if (!in) throw Error(Errc::io, "cannot open frame " + f.frame);
  run.input(f.frame);
  const RGBDFrame frame = read_frame_jsonl(in);
  json out = json::object();
  std::cout << "sphere fits per label\n";
  for (const auto& [label, pts] : segment_spheres(frame)) {
    if (pts.size() < 4) continue;
    const Sphere s = fit_sphere(pts);
    out[std::to_string(label)] = sphere_json(s);
    print_sphere("label " + std::to_string(label) + ": ", s);
  }
  run.write_json(path, out);
  run.finish();
}

struct RegisterFlags {
  std::string pairs, out;
};

void cmd_register(const Globals& g, const RegisterFlags& f) {
  Run run(g, "register");
  std::vector<Vec3> robot, camera;
  for (const auto& r : load_csv(run, f.pairs, 6)) {
    robot.emplace_back(r[0], r[1], r[2]);
    camera.emplace_back(r[3], r[4], r[5]);
  }
  const RigidTransform t = register_rigid(robot, camera);
  double sq = 0.0;
  for (std::size_t i = 0; i < robot.size(); ++i) sq += (t.apply(camera[i]) - robot[i]).squaredNorm();
  const double rms = std::sqrt(sq / static_cast<double>(robot.size()));
  const fs::path path = run.output("register", ".json", f.out);
  run.write_json(path, {{"transform", to_json(t)}, {"pairs", robot.size()}, {"residual_rms", rms}});
  run.finish();
  const Eigen::AngleAxisd aa(t.rotation);
  std::cout << "rigid registration over " << robot.size() << " pairs -> " << path.string() << "\n"
            << "  rotation " << fixed(aa.angle() * kDeg) << " deg about (" << fixed(aa.axis().x(), 4) << ", "
            << fixed(aa.axis().y(), 4) << ", " << fixed(aa.axis().z(), 4) << ")\n"
            << "  translation [mm] (" << fixed(t.translation.x() * 1000.0) << ", "
            << fixed(t.translation.y() * 1000.0) << ", " << fixed(t.translation.z() * 1000.0) << ")\n"
            << "  residual rms " << fixed(rms * 1000.0, 4) << " mm\n";
}

struct InspectFlags {
  std::string model, out;
  int member = 0;
};

void cmd_inspect(const Globals& g, const InspectFlags& f) {
  Run run(g, "inspect-linear");
  const auto ens = load_model(run, f.model);
  if (f.member < 0 || static_cast<std::size_t>(f.member) >= ens->size())
    throw Error(Errc::invalid_argument, "--member out of range");
  const LinearInspection ins = inspect_linear_model(ens->members()[static_cast<std::size_t>(f.member)]);
  std::ostringstream csv;
  write_inspection_csv(csv, ins);
  const fs::path path = run.output("inspect-linear", ".csv", f.out);
  run.write(path, csv.str());
  run.finish();
  std::cout << "linear model sensitivities (raw units; rows lag 0 = current input) -> " << path.string() << "\n";
  for (std::size_t o = 0; o < ins.grids.size(); ++o) {
    std::cout << "  output q" << ins.joints[o] << "\n        ";
    for (int j : ins.joints) std::cout << std::setw(10) << ("q" + std::to_string(j));
    std::cout << "\n";
    for (Eigen::Index k = 0; k < ins.grids[o].rows(); ++k) {
      std::cout << "    t-" << k << " ";
      for (Eigen::Index j = 0; j < ins.grids[o].cols(); ++j) std::cout << std::setw(10) << fixed(ins.grids[o](k, j), 4);
      std::cout << "\n";
    }
  }
}

int exit_code(Errc e) {
  switch (e) {
    case Errc::io:
    case Errc::parse: return kExitIo;
    case Errc::invalid_argument:
    case Errc::format_violation: return kExitUsage;
    default: return kExitCompute;
  }
}

}  // namespace

int main(int argc, char** argv) {
  Globals g;
  for (int i = 0; i < argc; ++i) g.command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Learned calibration of a simulated cable-driven surgical arm"};
  app.require_subcommand(1);
  app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "base seed of every random stream");
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "directory for generated files");

  auto add = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  CollectFlags cf;
  auto* collect_cmd = add("collect", "run a motion protocol through the plant and record (command, physical) pairs");
  collect_cmd->add_option("--protocol", cf.protocol, "random | pick")
      ->required()
      ->check(CLI::IsMember({"random", "pick"}));
  collect_cmd->add_option("--n", cf.n, "number of records")->required()->check(CLI::PositiveNumber);
  collect_cmd->add_option("--mode", cf.mode, "oracle | fiducial")->check(CLI::IsMember({"oracle", "fiducial"}));
  collect_cmd->add_option("--noise", cf.noise, "per-point fiducial noise bound [m]")->check(CLI::NonNegativeNumber);
  collect_cmd->add_option("--plant", cf.plant, "plant preset overriding the config")
      ->check(CLI::IsMember({"standard", "identity"}));
  collect_cmd->add_option("--out", cf.out, "output file");

  TrainFlags tf;
  auto* train_cmd = add("train", "fit a model or an ensemble to a dataset");
  train_cmd->add_option("--data", tf.data, "training dataset (JSONL)")->required();
  train_cmd->add_option("--val", tf.val, "validation dataset; default: hold out the end of --data");
  train_cmd->add_option("--val-fraction", tf.val_fraction, "held-out fraction when --val is absent")
      ->check(CLI::Range(0.0, 0.9));
  train_cmd->add_option("--ensemble", tf.ensemble, "ensemble members")->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", tf.out, "model file");
  tf.spec.add(train_cmd);
  tf.hyper.add(train_cmd);

  AblateFlags af;
  auto* ablate_cmd = add("ablate", "validation error versus history horizon");
  ablate_cmd->add_option("--data", af.data, "training dataset (JSONL)")->required();
  ablate_cmd->add_option("--val", af.val, "validation dataset; default: hold out the end of --data");
  ablate_cmd->add_option("--val-fraction", af.val_fraction, "held-out fraction when --val is absent")
      ->check(CLI::Range(0.0, 0.9));
  ablate_cmd->add_option("--horizons", af.horizons, "comma-separated horizons");
  ablate_cmd->add_option("--repeats", af.repeats, "seeds per horizon")->check(CLI::Range(2, 1000));
  ablate_cmd->add_option("--out", af.out, "CSV file");
  af.spec.add(ablate_cmd);
  af.hyper.add(ablate_cmd);

  TrackFlags kf;
  auto* track_cmd = add("track", "follow a trajectory through the plant with a controller");
  track_cmd->add_option("--controller", kf.controller, "passthrough | forward | inverse");
  track_cmd->add_option("--model", kf.model, "model or ensemble file");
  track_cmd->add_option("--protocol", kf.protocol, "random | pick")->check(CLI::IsMember({"random", "pick"}));
  track_cmd->add_option("--n", kf.n, "trajectory length")->check(CLI::PositiveNumber);
  track_cmd->add_option("--alpha", kf.alpha, "refinement step (default from config)")->check(CLI::Range(0.0, 1.0));
  track_cmd->add_option("--iterations", kf.iterations, "refinement iterations (default from config)")
      ->check(CLI::PositiveNumber);
  track_cmd->add_option("--plant", kf.plant, "plant preset overriding the config")
      ->check(CLI::IsMember({"standard", "identity"}));
  track_cmd->add_option("--out", kf.out, "CSV file");

  PegFlags pf;
  auto* peg_cmd = add("peg", "simulated peg-transfer board runs");
  peg_cmd->add_option("--controller", pf.controller, "passthrough | forward | inverse");
  peg_cmd->add_option("--model", pf.model, "model or ensemble file");
  peg_cmd->add_option("--runs", pf.runs, "board runs")->check(CLI::PositiveNumber);
  peg_cmd->add_option("--alpha", pf.alpha, "refinement step (default from config)")->check(CLI::Range(0.0, 1.0));
  peg_cmd->add_option("--iterations", pf.iterations, "refinement iterations (default from config)")
      ->check(CLI::PositiveNumber);
  peg_cmd->add_option("--plant", pf.plant, "plant preset overriding the config")
      ->check(CLI::IsMember({"standard", "identity"}));
  peg_cmd->add_option("--out", pf.out, "CSV file");

  StudyFlags sf;
  auto* study_cmd = add("study", "measurement noise, error identification, or coupling studies");
  study_cmd->add_option("kind", sf.kind, "measurement | errors | coupling")
      ->required()
      ->check(CLI::IsMember({"measurement", "errors", "coupling"}));
  study_cmd->add_option("--noise", sf.noise, "per-point noise bound [m]")->check(CLI::NonNegativeNumber);
  study_cmd->add_option("--sphere-noise", sf.sphere_noise, "per-sphere noise bound [m]")
      ->check(CLI::NonNegativeNumber);
  study_cmd->add_option("--trials", sf.trials, "Monte-Carlo trials (>= 100)")->check(CLI::Range(100, 100000000));
  study_cmd->add_option("--n", sf.n, "steps of the error-identification run")->check(CLI::Range(2, 100000000));
  study_cmd->add_option("--amplitude", sf.amplitude, "q5 sweep amplitude [rad]")->check(CLI::PositiveNumber);
  study_cmd->add_option("--plant", sf.plant, "plant preset overriding the config")
      ->check(CLI::IsMember({"standard", "identity"}));
  study_cmd->add_option("--out", sf.out, "output path without extension");

  FitSphereFlags ff;
  auto* fit_cmd = add("fit-sphere", "least-squares sphere fit of a point file or of every sphere in a frame");
  fit_cmd->add_option("--points", ff.points, "CSV of x,y,z [m]");
  fit_cmd->add_option("--frame", ff.frame, "RGB-D frame (JSONL)");
  fit_cmd->add_option("--out", ff.out, "JSON file");

  RegisterFlags rf;
  auto* reg_cmd = add("register", "rigid camera-to-robot registration from point pairs");
  reg_cmd->add_option("--pairs", rf.pairs, "CSV of robot x,y,z then camera x,y,z [m]")->required();
  reg_cmd->add_option("--out", rf.out, "JSON file");

  InspectFlags inf;
  auto* insp_cmd = add("inspect-linear", "raw-unit weight grids of a linear model");
  insp_cmd->add_option("--model", inf.model, "model or ensemble file")->required();
  insp_cmd->add_option("--member", inf.member, "ensemble member index");
  insp_cmd->add_option("--out", inf.out, "CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*collect_cmd) cmd_collect(g, cf);
    if (*train_cmd) cmd_train(g, tf);
    if (*ablate_cmd) cmd_ablate(g, af);
    if (*track_cmd) cmd_track(g, kf);
    if (*peg_cmd) cmd_peg(g, pf);
    if (*study_cmd) cmd_study(g, sf);
    if (*fit_cmd) cmd_fit_sphere(g, ff);
    if (*reg_cmd) cmd_register(g, rf);
    if (*insp_cmd) cmd_inspect(g, inf);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompute;
  }
  return 0;
}
