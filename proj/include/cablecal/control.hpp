#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "cablecal/error.hpp"
#include "cablecal/kinematics.hpp"
#include "cablecal/models.hpp"
#include "cablecal/plant.hpp"

namespace cablecal {

enum class ControllerKind { passthrough, forward_refine, inverse_direct };

std::string_view to_string(ControllerKind k);
ControllerKind parse_controller_kind(std::string_view s);

struct ControllerConfig {
  ControllerKind kind = ControllerKind::passthrough;
  double alpha = 0.5;
  int iterations = 3;  ///< M
  std::shared_ptr<const Ensemble> model;

  void validate() const;
};

/// Bounded record of what was sent to the robot (and, for est-format
/// models, what the model believed the robot did). Newest last.
class History {
 public:
  explicit History(std::size_t capacity = 0) : capacity_(capacity) {}

  /// Replaces the contents with `capacity` copies of q.
  void fill(const Vec6& q);
  void push(const Vec6& command, const Vec6& estimate);

  std::size_t size() const { return commands_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// k = 1 is the newest entry.
  const Vec6& command(std::size_t k) const { return commands_[commands_.size() - k]; }
  const Vec6& estimate(std::size_t k) const { return estimates_[estimates_.size() - k]; }

 private:
  std::size_t capacity_;
  std::deque<Vec6> commands_, estimates_;
};

/// Window x = [current; H prior entries] for `spec`, taking priors from the
/// history (commands for cmd format, estimates for est format).
Eigen::VectorXd model_window(const ModelSpec& spec, const Vec6& current, const History& tau);

struct CommandResult {
  JointConfig command;
  bool clamped = false;
};

/// Fixed-point refinement on the wrist joints: q_c <- q_c + alpha (q_d - f(q_c)),
/// starting from q_d, M times. Arm joints equal q_d. `residuals`, when given,
/// receives |f(q_c) - q_d| on the wrist after each of the M + 1 iterates.
CommandResult refine_command(const JointConfig& q_d, const std::function<Vec6(const Vec6&)>& f, int iterations,
                             double alpha, const KinematicParams& params, std::vector<double>* residuals = nullptr);
/// Same with a learned forward model evaluated against the frozen history.
CommandResult refine_command(const JointConfig& q_d, const Ensemble& f, const History& tau, int iterations,
                             double alpha, const KinematicParams& params, std::vector<double>* residuals = nullptr);
/// Wrist command from a learned inverse model; arm joints equal q_d.
CommandResult inverse_command(const JointConfig& q_d, const Ensemble& g, const History& tau,
                              const KinematicParams& params);

/// Owns its history. Not thread-safe; use one per trajectory.
class Controller {
 public:
  Controller(ControllerConfig cfg, KinematicParams params);

  const ControllerConfig& config() const { return cfg_; }
  /// History is refilled with q0.
  void reset(const JointConfig& q0);
  /// Computes the command for q_d and appends it to the history.
  CommandResult command(const JointConfig& q_d);

 private:
  ControllerConfig cfg_;
  KinematicParams params_;
  History history_;
  int horizon_ = 0;
};

struct TrackingRow {
  std::int64_t t = 0;
  Vec6 qd = Vec6::Zero();
  Vec6 qc = Vec6::Zero();
  Vec6 qp = Vec6::Zero();
  Vec6 joint_err = Vec6::Zero();  ///< qp - qd
  double cart_err_mm = 0.0;       ///< jaw tip distance between qp and qd
  bool clamped = false;
};

struct TrackingReport {
  std::vector<TrackingRow> rows;
  int clamped_count = 0;
};

/// Resets the plant and controller at the first target, then commands each
/// target in turn.
TrackingReport track_trajectory(const ControllerConfig& ctrl, Plant& plant, const std::vector<JointConfig>& targets);

/// Jaw tip distance in millimeters.
double cartesian_error_mm(const Vec6& a, const Vec6& b, const KinematicParams& params);

void write_tracking_csv(std::ostream& os, const TrackingReport& report);

}  // namespace cablecal
