#include "cablecal/bench.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include "cablecal/error.hpp"
#include "cablecal/parallel.hpp"
#include "cablecal/rng.hpp"

namespace cablecal {

namespace {

using nlohmann::json;

ErrorStats stats_of(const std::vector<double>& abs_errors) {
  ErrorStats s;
  if (abs_errors.empty()) return s;
  const double n = static_cast<double>(abs_errors.size());
  double sum = 0.0, sq = 0.0;
  for (double e : abs_errors) {
    sum += e;
    sq += e * e;
  }
  s.mean = sum / n;
  s.rms = std::sqrt(sq / n);
  double var = 0.0;
  for (double e : abs_errors) var += (e - s.mean) * (e - s.mean);
  s.sd = std::sqrt(var / n);
  return s;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

json stats_json(const ErrorStats& s) { return {{"rms", s.rms}, {"mean", s.mean}, {"sd", s.sd}}; }

json vec6_json(const Vec6& v) { return std::vector<double>(v.data(), v.data() + 6); }

}  // namespace

MeasurementStudy measurement_noise_study(const KinematicParams& params, const MeasurementStudyOptions& opts) {
  if (opts.trials < 100) throw Error(Errc::invalid_argument, "the noise study needs at least 100 trials");
  if (!(opts.point_max >= 0.0) || !(opts.sphere_max >= 0.0))
    throw Error(Errc::invalid_argument, "noise bounds must be non-negative");
  const auto configs = sample_random_trajectory(opts.workspace, opts.trials, params, opts.seed);
  const auto n = static_cast<std::size_t>(opts.trials);
  std::vector<Vec6> joint_err(n);
  std::vector<std::array<double, 6>> sphere_err(n);
  const FrameNoise noise{opts.point_max, opts.sphere_max};
  parallel_for(n, opts.jobs, [&](std::size_t i) {
    const JointConfig q(configs[i].q, Role::physical);
    const ToolPose truth = forward_kinematics(q, params);
    const RGBDFrame frame = synthesize_frame(q, params, opts.camera, noise, derive_seed(opts.seed, i + 1));
    const ConfigEstimate est = estimate_configuration(frame, params, opts.camera);
    joint_err[i] = est.q.q - q.q;
    for (int k = 0; k < 2; ++k) sphere_err[i][k] = (est.spheres.shaft[k].center - truth.fiducial_centers[k]).norm();
    for (int k = 0; k < 4; ++k) {
      if (!est.spheres.jaw[k]) throw Error(Errc::no_spheres_found, "jaw sphere missing in a noise-study frame");
      sphere_err[i][2 + k] = (est.spheres.jaw[k]->center - truth.fiducial_centers[2 + k]).norm();
    }
  });
  MeasurementStudy out;
  out.trials = opts.trials;
  for (int j = 0; j < 6; ++j) {
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = std::abs(joint_err[i][j]);
    out.joints[j] = stats_of(e);
  }
  std::vector<double> all;
  all.reserve(6 * n);
  for (const auto& s : sphere_err) all.insert(all.end(), s.begin(), s.end());
  out.sphere = stats_of(all);
  return out;
}

ErrorIdentification error_identification(const PlantConfig& cfg, const KinematicParams& params, int n,
                                         std::uint64_t seed, const Workspace& ws) {
  if (n < 2) throw Error(Errc::invalid_argument, "error identification needs at least 2 steps");
  const auto free_cmds = sample_random_trajectory(ws, n, params, seed);
  auto fixed_cmds = free_cmds;
  const Vec3 arm = wrist_joints_from_position(ws.center(), params).q;
  for (auto& q : fixed_cmds) q.set_arm(arm);

  auto run = [&](const std::vector<JointConfig>& cmds, std::vector<Vec6>* errors) {
    Plant plant(cfg, params);
    const Dataset ds = collect(cmds, plant, {});
    if (!ds.meta.complete) throw Error(Errc::limit_violation, ds.meta.abort_reason);
    Vec6 sq = Vec6::Zero();
    for (const auto& r : ds.records) {
      const Vec6 e = r.qp - r.qc;
      sq += e.cwiseAbs2();
      if (errors) errors->push_back(e);
    }
    return Vec6((sq / static_cast<double>(ds.size())).cwiseSqrt());
  };

  ErrorIdentification out;
  std::vector<Vec6> errors;
  out.rmse_free = run(free_cmds, &errors);
  out.rmse_fixed = run(fixed_cmds, nullptr);
  std::vector<double> de5, de6, dc5, dc6;
  for (std::size_t t = 1; t < errors.size(); ++t) {
    de5.push_back(errors[t][4] - errors[t - 1][4]);
    de6.push_back(errors[t][5] - errors[t - 1][5]);
    dc5.push_back(free_cmds[t].q[4] - free_cmds[t - 1].q[4]);
    dc6.push_back(free_cmds[t].q[5] - free_cmds[t - 1].q[5]);
  }
  out.corr_q5_from_q6 = correlation(de5, dc6);
  out.corr_q6_from_q5 = correlation(de6, dc5);
  return out;
}

double coupling_response(const PlantConfig& cfg, const KinematicParams& params, double amplitude) {
  PlantConfig quiet = cfg;
  quiet.noise_sd.fill(0.0);
  Plant plant(quiet, params);
  JointConfig q(Vec6::Zero(), Role::commanded);
  q.set_arm(wrist_joints_from_position(Workspace{}.center(), params).q);
  plant.reset(q);
  const double start = plant.step(q).q[5];
  double worst = 0.0;
  const int steps = 40;
  for (int i = 1; i <= 2 * steps; ++i) {
    const double s = i <= steps ? static_cast<double>(i) / steps : static_cast<double>(2 * steps - i) / steps;
    q[4] = amplitude * s;
    worst = std::max(worst, std::abs(plant.step(q).q[5] - start));
  }
  return worst;
}

double cdf_fraction(const std::vector<double>& errors_mm, double threshold) {
  if (errors_mm.empty()) throw Error(Errc::invalid_argument, "no errors to summarize");
  if (std::isinf(threshold) && threshold > 0) return 1.0;
  const auto within = std::count_if(errors_mm.begin(), errors_mm.end(), [&](double e) { return e <= threshold; });
  return static_cast<double>(within) / static_cast<double>(errors_mm.size());
}

TrackingSummary tracking_metrics(const std::vector<double>& errors_mm, const std::vector<double>& thresholds) {
  if (errors_mm.empty()) throw Error(Errc::invalid_argument, "no errors to summarize");
  std::vector<double> sorted = errors_mm;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  TrackingSummary s;
  s.count = n;
  s.min = sorted.front();
  s.max = sorted.back();
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const ErrorStats st = stats_of(errors_mm);
  s.mean = st.mean;
  s.sd = st.sd;
  std::vector<double> th = thresholds;
  std::sort(th.begin(), th.end());
  for (double t : th) s.cdf.emplace_back(t, cdf_fraction(errors_mm, t));
  return s;
}

TrackingSummary tracking_metrics(const TrackingReport& report, const std::vector<double>& thresholds) {
  std::vector<double> e;
  e.reserve(report.rows.size());
  for (const auto& r : report.rows) e.push_back(r.cart_err_mm);
  return tracking_metrics(e, thresholds);
}

json to_json(const TrackingSummary& s) {
  json cdf = json::array();
  for (const auto& [t, f] : s.cdf) cdf.push_back({{"threshold_mm", t}, {"fraction", f}});
  return {{"count", s.count}, {"max_mm", s.max},   {"min_mm", s.min}, {"mean_mm", s.mean},
          {"median_mm", s.median}, {"sd_mm", s.sd}, {"cdf", cdf}};
}

TrackingSummary summary_from_json(const json& j) {
  try {
    TrackingSummary s;
    s.count = j.value("count", std::size_t{0});
    s.max = j.at("max_mm").get<double>();
    s.min = j.at("min_mm").get<double>();
    s.mean = j.at("mean_mm").get<double>();
    s.median = j.at("median_mm").get<double>();
    s.sd = j.at("sd_mm").get<double>();
    if (j.contains("cdf"))
      for (const auto& e : j.at("cdf")) s.cdf.emplace_back(e.at("threshold_mm").get<double>(), e.at("fraction").get<double>());
    if (!(s.min <= s.median && s.median <= s.max) || s.sd < 0.0)
      throw Error(Errc::parse, "tracking summary violates min <= median <= max");
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("tracking summary: ") + e.what());
  }
}

PegBoard PegBoard::standard(const Workspace& ws) {
  PegBoard b;
  const Vec3 span = ws.hi - ws.lo;
  // two 2 x 3 grids at the left and right ends of the box
  for (double x : {0.1, 0.3, 0.7, 0.9})
    for (double y : {0.15, 0.5, 0.85}) b.pegs.emplace_back(ws.lo.x() + x * span.x(), ws.lo.y() + y * span.y(), ws.hi.z());
  b.blocks.assign(b.pegs.begin(), b.pegs.begin() + 6);
  return b;
}

void PegBoard::validate() const {
  if (pegs.size() != 12 || blocks.size() != 6) throw Error(Errc::invalid_argument, "board needs 12 pegs and 6 blocks");
  if (!(pick_tol_mm > 0.0) || !(place_tol_mm > 0.0)) throw Error(Errc::invalid_argument, "tolerances must be positive");
  for (std::size_t a = 0; a < pegs.size(); ++a)
    for (std::size_t b = a + 1; b < pegs.size(); ++b)
      if ((pegs[a] - pegs[b]).norm() < 1e-9) throw Error(Errc::invalid_argument, "pegs must be distinct");
}

std::string_view to_string(PegOutcome o) {
  switch (o) {
    case PegOutcome::success: return "success";
    case PegOutcome::pick_failure: return "pick_failure";
    case PegOutcome::stuck: return "stuck";
    case PegOutcome::fall: return "fall";
  }
  return "?";
}

double PegReport::success_rate() const {
  return attempts.empty() ? 0.0 : static_cast<double>(success) / static_cast<double>(attempts.size());
}

PegOutcome classify_transfer(double grasp_err_mm, const Vec3& place_err_m, const PegBoard& board) {
  if (grasp_err_mm > board.pick_tol_mm) return PegOutcome::pick_failure;
  const double place = 1000.0 * place_err_m.norm();
  if (place > board.place_tol_mm) return PegOutcome::fall;
  const double lateral = 1000.0 * place_err_m.head<2>().norm();
  const double axial = 1000.0 * std::abs(place_err_m.z());
  if (place > 0.5 * board.place_tol_mm && lateral >= axial) return PegOutcome::stuck;
  return PegOutcome::success;
}

PegReport peg_transfer_sim(const ControllerConfig& ctrl, const PlantConfig& plant_cfg, const KinematicParams& params,
                           const PegBoard& board, const PegOptions& opts) {
  board.validate();
  if (opts.runs < 1) throw Error(Errc::invalid_argument, "need at least one board run");
  opts.workspace.check_reachable(params);
  const double grasp_z = opts.workspace.lo.z();
  const auto& m = opts.motion;
  PegReport report;
  for (int run = 0; run < opts.runs; ++run) {
    const std::uint64_t run_seed = derive_seed(opts.seed, static_cast<std::uint64_t>(run));
    Rng rng = make_rng(run_seed);
    PlantConfig cfg = plant_cfg;
    cfg.seed = derive_seed(run_seed, 1);
    Plant plant(cfg, params);
    Controller controller(ctrl, params);

    Vec3 pos = opts.workspace.center();
    pos.z() = opts.workspace.hi.z();
    Vec3 wrist = Vec3::Zero();
    bool started = false;
    // Drives one segment through controller and plant; returns the last desired and physical configs.
    auto drive = [&](const Vec3& to, int steps, SegmentKind kind, Vec6* q_d, Vec6* q_p) {
      Trajectory seg;
      const Vec3 to_wrist = next_wrist_keyframe(rng, wrist, m);
      append_segment(seg, pos, to, wrist, to_wrist, steps, kind, params);
      for (const auto& target : seg.configs) {
        const JointConfig desired(target.q, Role::desired);
        if (!started) {
          controller.reset(desired);
          plant.reset(desired);
          started = true;
        }
        const auto cmd = controller.command(desired);
        *q_p = plant.step(cmd.command).q;
        *q_d = desired.q;
      }
      pos = to;
      wrist = to_wrist;
      return steps;
    };
    auto transfer = [&](int block, int from, int to) {
      PegAttempt a;
      a.run = run;
      a.block = block;
      a.from_peg = from;
      a.to_peg = to;
      Vec6 qd, qp;
      const Vec3 src = board.pegs[static_cast<std::size_t>(from)];
      const Vec3 dst = board.pegs[static_cast<std::size_t>(to)];
      a.waypoints += drive(src, m.horizontal_waypoints, SegmentKind::horizontal, &qd, &qp);
      a.waypoints += drive(Vec3(src.x(), src.y(), grasp_z), m.vertical_waypoints, SegmentKind::vertical, &qd, &qp);
      a.grasp_err_mm = cartesian_error_mm(qp, qd, params);
      if (a.grasp_err_mm <= board.pick_tol_mm) {
        a.waypoints += drive(src, m.vertical_waypoints, SegmentKind::vertical, &qd, &qp);
        a.waypoints += drive(dst, m.horizontal_waypoints, SegmentKind::horizontal, &qd, &qp);
        a.waypoints += drive(Vec3(dst.x(), dst.y(), grasp_z), m.vertical_waypoints, SegmentKind::vertical, &qd, &qp);
        const Vec3 place_err = forward_kinematics_unchecked(qp, params).tip_position -
                               forward_kinematics_unchecked(qd, params).tip_position;
        a.place_err_mm = 1000.0 * place_err.norm();
        a.outcome = classify_transfer(a.grasp_err_mm, place_err, board);
      } else {
        a.outcome = PegOutcome::pick_failure;
      }
      a.waypoints += drive(Vec3(pos.x(), pos.y(), opts.workspace.hi.z()), m.vertical_waypoints, SegmentKind::vertical,
                           &qd, &qp);
      return a;
    };

    std::vector<bool> moved(6, false);
    for (int b = 0; b < 6; ++b) {
      const PegAttempt a = transfer(b, b, 6 + b);
      moved[static_cast<std::size_t>(b)] = a.outcome == PegOutcome::success;
      report.attempts.push_back(a);
    }
    for (int b = 0; b < 6; ++b)
      if (moved[static_cast<std::size_t>(b)]) report.attempts.push_back(transfer(b, 6 + b, b));
  }
  double waypoints = 0.0;
  for (const auto& a : report.attempts) {
    switch (a.outcome) {
      case PegOutcome::success: ++report.success; break;
      case PegOutcome::pick_failure: ++report.pick_failure; break;
      case PegOutcome::stuck: ++report.stuck; break;
      case PegOutcome::fall: ++report.fall; break;
    }
    waypoints += a.waypoints;
  }
  report.mean_waypoints = report.attempts.empty() ? 0.0 : waypoints / static_cast<double>(report.attempts.size());
  return report;
}

LinearInspection inspect_linear_model(const Model& model) {
  if (!model.trained()) throw Error(Errc::untrained_model, "model has no weights");
  const ModelSpec& spec = model.spec();
  if (spec.arch != Arch::linear) throw Error(Errc::invalid_argument, "inspection needs a linear model");
  const int nj = spec.joint_count(), j0 = first_joint(spec.joints), lags = spec.horizon + 1;
  const auto& blk = model.network().blocks().front();
  const Eigen::Map<const Eigen::MatrixXd> w(model.params().data() + blk.offset, blk.rows, blk.cols);
  const auto& n = model.normalization();
  LinearInspection out;
  for (int j = 0; j < nj; ++j) out.joints.push_back(j0 + j + 1);
  for (int o = 0; o < nj; ++o) {
    Eigen::MatrixXd grid(lags, nj);
    for (int k = 0; k < lags; ++k)
      for (int j = 0; j < nj; ++j) {
        const int f = k * nj + j;
        grid(k, j) = n.y_scale[o] * w(o, f) / n.x_scale[f];
      }
    if (spec.output == OutputFormat::delta) grid(0, o) += 1.0;
    out.grids.push_back(std::move(grid));
  }
  return out;
}

void write_measurement_csv(std::ostream& os, const MeasurementStudy& s) {
  os << std::setprecision(17) << "quantity,unit,rms,mean,sd\n";
  for (int j = 0; j < 6; ++j)
    os << 'q' << (j + 1) << ',' << (j == 2 ? "m" : "rad") << ',' << s.joints[j].rms << ',' << s.joints[j].mean << ','
       << s.joints[j].sd << '\n';
  os << "sphere_center,m," << s.sphere.rms << ',' << s.sphere.mean << ',' << s.sphere.sd << '\n';
}

json to_json(const MeasurementStudy& s) {
  json joints = json::array();
  for (const auto& j : s.joints) joints.push_back(stats_json(j));
  return {{"trials", s.trials}, {"joints", joints}, {"sphere_m", stats_json(s.sphere)}};
}

json to_json(const ErrorIdentification& e) {
  return {{"rmse_free", vec6_json(e.rmse_free)},
          {"rmse_fixed", vec6_json(e.rmse_fixed)},
          {"corr_q5_from_q6", e.corr_q5_from_q6},
          {"corr_q6_from_q5", e.corr_q6_from_q5}};
}

void write_peg_csv(std::ostream& os, const PegReport& r) {
  os << std::setprecision(17) << "run,block,from_peg,to_peg,outcome,grasp_err_mm,place_err_mm,waypoints\n";
  for (const auto& a : r.attempts)
    os << a.run << ',' << a.block << ',' << a.from_peg << ',' << a.to_peg << ',' << to_string(a.outcome) << ','
       << a.grasp_err_mm << ',' << a.place_err_mm << ',' << a.waypoints << '\n';
}

json to_json(const PegReport& r) {
  return {{"attempts", r.attempts.size()}, {"success", r.success},         {"pick_failure", r.pick_failure},
          {"stuck", r.stuck},              {"fall", r.fall},               {"success_rate", r.success_rate()},
          {"mean_waypoints", r.mean_waypoints}};
}

void write_inspection_csv(std::ostream& os, const LinearInspection& s) {
  os << std::setprecision(17) << "output_joint,lag";
  for (int j : s.joints) os << ",q" << j;
  os << '\n';
  for (std::size_t o = 0; o < s.grids.size(); ++o)
    for (Eigen::Index k = 0; k < s.grids[o].rows(); ++k) {
      os << 'q' << s.joints[o] << ',' << k;
      for (Eigen::Index j = 0; j < s.grids[o].cols(); ++j) os << ',' << s.grids[o](k, j);
      os << '\n';
    }
}

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << std::setprecision(17) << "horizon,mean_mse,sd_mse,repeats\n";
  for (const auto& r : rows) os << r.horizon << ',' << r.mean_mse << ',' << r.sd_mse << ',' << r.mse.size() << '\n';
}

}  // namespace cablecal
