#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "cablecal/control.hpp"
#include "cablecal/data.hpp"
#include "cablecal/fiducial.hpp"

namespace cablecal {

// ---- measurement-noise study ----

struct MeasurementStudyOptions {
  double point_max = 0.00067;  ///< per-point displacement bound [m]
  double sphere_max = 0.0;     ///< per-sphere detection displacement bound [m]
  int trials = 120;
  std::uint64_t seed = 0;
  Workspace workspace;
  CameraModel camera = CameraModel::standard();
  int jobs = 1;
};

/// Statistics of absolute errors; sd is the population standard deviation.
struct ErrorStats {
  double rms = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

struct MeasurementStudy {
  std::array<ErrorStats, 6> joints{};  ///< rad (m for q3)
  ErrorStats sphere;                   ///< fitted center distance [m]
  int trials = 0;
};

/// Monte-Carlo over random in-workspace configurations: render noisy
/// frames, fit spheres, re-estimate joints.
MeasurementStudy measurement_noise_study(const KinematicParams& params, const MeasurementStudyOptions& opts);

// ---- error identification ----

struct ErrorIdentification {
  Vec6 rmse_free = Vec6::Zero();   ///< q_p - q_c with the arm moving
  Vec6 rmse_fixed = Vec6::Zero();  ///< same wrist commands, arm held at the workspace center
  double corr_q5_from_q6 = 0.0;    ///< correlation of q5 error increments with q6 command increments
  double corr_q6_from_q5 = 0.0;
};

/// Replays one random trajectory twice: once as sampled and once with the
/// arm joints fixed.
ErrorIdentification error_identification(const PlantConfig& cfg, const KinematicParams& params, int n = 270,
                                         std::uint64_t seed = 0, const Workspace& ws = {});

/// Largest excursion of a commanded-stationary q6 while q5 sweeps a
/// triangle of the given amplitude. Measurement noise is disabled.
double coupling_response(const PlantConfig& cfg, const KinematicParams& params, double amplitude = 0.6);

// ---- tracking statistics ----

struct TrackingSummary {
  std::size_t count = 0;
  double max = 0.0, min = 0.0, mean = 0.0, median = 0.0, sd = 0.0;  ///< mm; sd is population
  std::vector<std::pair<double, double>> cdf;  ///< (threshold mm, fraction with error <= threshold)
};

inline const std::vector<double> kDefaultCdfThresholds{0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0};

TrackingSummary tracking_metrics(const std::vector<double>& errors_mm,
                                 const std::vector<double>& thresholds = kDefaultCdfThresholds);
TrackingSummary tracking_metrics(const TrackingReport& report,
                                 const std::vector<double>& thresholds = kDefaultCdfThresholds);
/// Fraction of errors <= threshold; 1 for an infinite threshold.
double cdf_fraction(const std::vector<double>& errors_mm, double threshold);

nlohmann::json to_json(const TrackingSummary& s);
TrackingSummary summary_from_json(const nlohmann::json& j);

// ---- peg transfer ----

/// Pegs and blocks, given as wrist sites at the top of the workspace box.
/// Pegs 0..5 are the left column, 6..11 the right; block k starts on peg k.
struct PegBoard {
  std::vector<Vec3> pegs;
  std::vector<Vec3> blocks;
  double pick_tol_mm = 2.0;
  double place_tol_mm = 3.0;

  static PegBoard standard(const Workspace& ws = {});
  void validate() const;
};

enum class PegOutcome { success, pick_failure, stuck, fall };
std::string_view to_string(PegOutcome o);

struct PegAttempt {
  int run = 0;
  int block = 0;
  int from_peg = 0;
  int to_peg = 0;
  PegOutcome outcome = PegOutcome::success;
  double grasp_err_mm = 0.0;
  double place_err_mm = 0.0;
  int waypoints = 0;
};

struct PegReport {
  std::vector<PegAttempt> attempts;
  int success = 0, pick_failure = 0, stuck = 0, fall = 0;
  double mean_waypoints = 0.0;  ///< transfer-time proxy

  double success_rate() const;
};

struct PegOptions {
  int runs = 1;
  std::uint64_t seed = 0;
  PickPlaceOptions motion;
  Workspace workspace;
};

/// Each run: move every block left to right, then every block that made it
/// back again. A block whose first transfer fails is not retried. Runs use
/// seeds derive_seed(seed, run) for the wrist motion and plant noise.
PegReport peg_transfer_sim(const ControllerConfig& ctrl, const PlantConfig& plant_cfg, const KinematicParams& params,
                           const PegBoard& board, const PegOptions& opts);

/// Outcome of one transfer from the tip errors at the grasp and place waypoints.
PegOutcome classify_transfer(double grasp_err_mm, const Vec3& place_err_m, const PegBoard& board);

// ---- linear model inspection ----

/// Raw-unit sensitivities of a linear model, one grid per output joint:
/// row k is lag k (0 = current input), column j the input joint.
/// Delta models include the identity pass-through of the current input.
struct LinearInspection {
  std::vector<int> joints;  ///< 1-based joint numbers of inputs and outputs
  std::vector<Eigen::MatrixXd> grids;
};

LinearInspection inspect_linear_model(const Model& model);

// ---- CSV / JSON exports ----

void write_measurement_csv(std::ostream& os, const MeasurementStudy& s);
nlohmann::json to_json(const MeasurementStudy& s);
nlohmann::json to_json(const ErrorIdentification& e);
void write_peg_csv(std::ostream& os, const PegReport& r);
nlohmann::json to_json(const PegReport& r);
void write_inspection_csv(std::ostream& os, const LinearInspection& s);
void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows);

}  // namespace cablecal
