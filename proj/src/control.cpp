#include "cablecal/control.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace cablecal {

std::string_view to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::passthrough: return "passthrough";
    case ControllerKind::forward_refine: return "forward";
    case ControllerKind::inverse_direct: return "inverse";
  }
  return "?";
}

ControllerKind parse_controller_kind(std::string_view s) {
  if (s == "passthrough") return ControllerKind::passthrough;
  if (s == "forward" || s == "forward-refine") return ControllerKind::forward_refine;
  if (s == "inverse" || s == "inverse-direct") return ControllerKind::inverse_direct;
  throw Error(Errc::invalid_argument, "unknown controller '" + std::string(s) + "'");
}

void ControllerConfig::validate() const {
  if (kind == ControllerKind::passthrough) return;
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(Errc::invalid_argument, "alpha must lie in (0, 1]");
  if (kind == ControllerKind::forward_refine && iterations < 1)
    throw Error(Errc::invalid_argument, "forward refinement needs at least one iteration");
  if (!model) throw Error(Errc::untrained_model, "controller needs a model");
  const Direction want = kind == ControllerKind::forward_refine ? Direction::forward : Direction::inverse;
  if (model->spec().direction != want)
    throw Error(Errc::direction_mismatch, std::string(to_string(kind)) + " controller got a " +
                                              std::string(to_string(model->spec().direction)) + " model");
}

void History::fill(const Vec6& q) {
  commands_.assign(capacity_, q);
  estimates_.assign(capacity_, q);
}

void History::push(const Vec6& command, const Vec6& estimate) {
  if (capacity_ == 0) return;
  if (commands_.size() == capacity_) {
    commands_.pop_front();
    estimates_.pop_front();
  }
  commands_.push_back(command);
  estimates_.push_back(estimate);
}

Eigen::VectorXd model_window(const ModelSpec& spec, const Vec6& current, const History& tau) {
  const auto h = static_cast<std::size_t>(spec.horizon);
  if (tau.size() < h)
    throw Error(Errc::history_too_long, "history holds " + std::to_string(tau.size()) + " entries, model needs " +
                                            std::to_string(h));
  const int nj = spec.joint_count(), j0 = first_joint(spec.joints);
  const bool est = spec.input == InputFormat::est;
  Eigen::VectorXd x(spec.input_size());
  x.head(nj) = current.segment(j0, nj);
  for (std::size_t k = 1; k <= h; ++k)
    x.segment(static_cast<Eigen::Index>(k) * nj, nj) = (est ? tau.estimate(k) : tau.command(k)).segment(j0, nj);
  return x;
}

namespace {

/// Model prediction spread onto a full joint vector; joints the model does
/// not cover keep the candidate's values.
Vec6 predict_full(const Ensemble& m, const Vec6& current, const History& tau) {
  const ModelSpec& spec = m.spec();
  Vec6 out = current;
  out.segment(first_joint(spec.joints), spec.joint_count()) = m.predict(model_window(spec, current, tau));
  return out;
}

}  // namespace

CommandResult refine_command(const JointConfig& q_d, const std::function<Vec6(const Vec6&)>& f, int iterations,
                             double alpha, const KinematicParams& params, std::vector<double>* residuals) {
  if (iterations < 1) throw Error(Errc::invalid_argument, "refinement needs at least one iteration");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(Errc::invalid_argument, "alpha must lie in (0, 1]");
  Vec6 q = q_d.q;
  if (residuals) residuals->clear();
  for (int j = 0; j < iterations; ++j) {
    const Vec3 err = q_d.q.tail<3>() - f(q).tail<3>();
    if (residuals) residuals->push_back(err.norm());
    q.tail<3>() += alpha * err;
  }
  if (residuals) residuals->push_back((q_d.q.tail<3>() - f(q).tail<3>()).norm());
  CommandResult r;
  r.command = JointConfig(clamp_to_limits(q, params, &r.clamped), Role::commanded);
  return r;
}

CommandResult refine_command(const JointConfig& q_d, const Ensemble& f, const History& tau, int iterations,
                             double alpha, const KinematicParams& params, std::vector<double>* residuals) {
  if (f.spec().direction != Direction::forward)
    throw Error(Errc::direction_mismatch, "refinement needs a forward model");
  return refine_command(
      q_d, [&](const Vec6& q) { return predict_full(f, q, tau); }, iterations, alpha, params, residuals);
}

CommandResult inverse_command(const JointConfig& q_d, const Ensemble& g, const History& tau,
                              const KinematicParams& params) {
  const ModelSpec& spec = g.spec();
  if (spec.direction != Direction::inverse)
    throw Error(Errc::direction_mismatch, "direct command generation needs an inverse model");
  Vec6 q = predict_full(g, q_d.q, tau);
  q.head<3>() = q_d.q.head<3>();
  CommandResult r;
  r.command = JointConfig(clamp_to_limits(q, params, &r.clamped), Role::commanded);
  return r;
}

Controller::Controller(ControllerConfig cfg, KinematicParams params) : cfg_(std::move(cfg)), params_(params) {
  cfg_.validate();
  horizon_ = cfg_.model && cfg_.kind != ControllerKind::passthrough ? cfg_.model->spec().horizon : 0;
  history_ = History(static_cast<std::size_t>(horizon_));
}

void Controller::reset(const JointConfig& q0) { history_.fill(q0.q); }

CommandResult Controller::command(const JointConfig& q_d) {
  CommandResult r;
  switch (cfg_.kind) {
    case ControllerKind::passthrough:
      r.command = JointConfig(clamp_to_limits(q_d.q, params_, &r.clamped), Role::commanded);
      break;
    case ControllerKind::forward_refine:
      r = refine_command(q_d, *cfg_.model, history_, cfg_.iterations, cfg_.alpha, params_);
      break;
    case ControllerKind::inverse_direct:
      r = inverse_command(q_d, *cfg_.model, history_, params_);
      break;
  }
  // arm joints are never recalibrated
  r.command.q.head<3>() = q_d.q.head<3>();
  Vec6 estimate = r.command.q;
  if (cfg_.kind == ControllerKind::forward_refine && cfg_.model->spec().input == InputFormat::est)
    estimate = predict_full(*cfg_.model, r.command.q, history_);
  history_.push(r.command.q, estimate);
  return r;
}

double cartesian_error_mm(const Vec6& a, const Vec6& b, const KinematicParams& params) {
  return 1000.0 *
         (forward_kinematics_unchecked(a, params).tip_position - forward_kinematics_unchecked(b, params).tip_position)
             .norm();
}

TrackingReport track_trajectory(const ControllerConfig& ctrl, Plant& plant, const std::vector<JointConfig>& targets) {
  if (targets.empty()) throw Error(Errc::invalid_argument, "no targets to track");
  Controller controller(ctrl, plant.params());
  controller.reset(targets.front());
  plant.reset(targets.front());
  TrackingReport report;
  report.rows.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto cmd = controller.command(targets[i]);
    const JointConfig qp = plant.step(cmd.command);
    TrackingRow row;
    row.t = static_cast<std::int64_t>(i);
    row.qd = targets[i].q;
    row.qc = cmd.command.q;
    row.qp = qp.q;
    row.joint_err = qp.q - targets[i].q;
    row.cart_err_mm = cartesian_error_mm(qp.q, targets[i].q, plant.params());
    row.clamped = cmd.clamped;
    report.clamped_count += cmd.clamped ? 1 : 0;
    report.rows.push_back(row);
  }
  return report;
}

void write_tracking_csv(std::ostream& os, const TrackingReport& report) {
  os << "t";
  for (const char* name : {"qd", "qc", "qp", "joint_err"})
    for (int j = 1; j <= 6; ++j) os << ',' << name << j;
  os << ",cart_err_mm,clamped\n";
  os << std::setprecision(17);
  for (const auto& r : report.rows) {
    os << r.t;
    for (const Vec6* v : {&r.qd, &r.qc, &r.qp, &r.joint_err})
      for (int j = 0; j < 6; ++j) os << ',' << (*v)[j];
    os << ',' << r.cart_err_mm << ',' << (r.clamped ? 1 : 0) << '\n';
  }
}

}  // namespace cablecal
