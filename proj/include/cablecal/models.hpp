#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cablecal/data.hpp"
#include "cablecal/error.hpp"
#include "cablecal/formats.hpp"
#include "cablecal/networks.hpp"

namespace cablecal {

struct ModelSpec {
  Arch arch = Arch::rnn;
  InputFormat input = InputFormat::cmd;
  OutputFormat output = OutputFormat::delta;
  int horizon = 4;
  Direction direction = Direction::forward;
  int hidden = 256;
  int layers = 2;        ///< hidden layers of the feed-forward part
  double lambda = 1e-3;  ///< LASSO penalty, linear only
  JointSet joints = JointSet::wrist;

  /// Throws format_violation for inverse + est, invalid_argument otherwise.
  void validate() const;
  ExampleOptions example_options() const;
  nn::NetworkShape network_shape() const;
  int joint_count() const { return cablecal::joint_count(joints); }
  int input_size() const { return (horizon + 1) * joint_count(); }
  /// e.g. "rnn-cmd-delta-h4-forward"
  std::string name() const;
};

/// Standardization by training statistics. Input statistics are per joint,
/// pooled across lags, so every block of the window shares them.
struct Normalization {
  Eigen::VectorXd x_mean, x_scale;  ///< per input feature
  Eigen::VectorXd y_mean, y_scale;  ///< per output joint

  static Normalization fit(const Examples& ex, int joints);
  void validate() const;
};

struct TrainingMeta {
  std::vector<double> loss_curve;  ///< mean standardized training loss per epoch
  std::uint64_t seed = 0;
  std::string dataset_hash;
  double val_mse = 0.0;       ///< raw units, mean over examples and joints
  double baseline_mse = 0.0;  ///< same metric with the current input as prediction
  int epochs = 0;
};

struct TrainHyper {
  double learning_rate = 1e-3;
  int epochs = 300;
  int batch = 64;
  double decay = 0.5;  ///< learning-rate factor applied at 60% and 80% of epochs
  std::uint64_t seed = 0;
};

/// Trained approximator. Immutable; safe to share across threads.
class Model {
 public:
  Model() = default;
  Model(ModelSpec spec, Normalization norm, Eigen::VectorXd params, TrainingMeta meta);

  const ModelSpec& spec() const { return spec_; }
  const Normalization& normalization() const { return norm_; }
  const Eigen::VectorXd& params() const { return params_; }
  const TrainingMeta& meta() const { return meta_; }
  const nn::Network& network() const;
  bool trained() const { return net_ != nullptr; }

  /// Absolute predictions for raw windows (rows = examples).
  Eigen::MatrixXd predict_rows(const Eigen::MatrixXd& x) const;
  /// One raw window; returns the predicted joints (3 or 6, absolute).
  Eigen::VectorXd predict(const Eigen::VectorXd& x) const;

 private:
  ModelSpec spec_;
  Normalization norm_;
  Eigen::VectorXd params_;
  TrainingMeta meta_;
  std::shared_ptr<const nn::Network> net_;
};

/// Member mean of models sharing one spec.
class Ensemble {
 public:
  Ensemble() = default;
  explicit Ensemble(std::vector<Model> members);

  const std::vector<Model>& members() const { return members_; }
  const ModelSpec& spec() const;
  std::size_t size() const { return members_.size(); }

  Eigen::MatrixXd predict_rows(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd predict(const Eigen::VectorXd& x) const;

 private:
  std::vector<Model> members_;
};

/// Mean squared error in raw units between predictions and absolute targets.
double prediction_mse(const Eigen::MatrixXd& pred, const Examples& ex);
/// Absolute targets of the examples (delta targets plus their base).
Eigen::MatrixXd absolute_targets(const Examples& ex);
/// MSE of the uncalibrated prediction: the first block of each window.
double baseline_mse(const Examples& ex);

Model train(const ModelSpec& spec, const Examples& train, const Examples& val, const TrainHyper& hyper,
            const std::string& dataset_hash = {});
/// Members use seeds derive_seed(hyper.seed, k).
Ensemble train_ensemble(const ModelSpec& spec, const Examples& train, const Examples& val, const TrainHyper& hyper,
                        int members, int jobs = 1, const std::string& dataset_hash = {});

/// Forward est-format inference over a command sequence: each window's prior
/// entries are the model's own earlier predictions. The first H steps use
/// the commands themselves as priors. Returns one row per command.
Eigen::MatrixXd rollout_est(const Ensemble& model, const std::vector<JointConfig>& commands);

/// Max relative error between analytic and central-difference gradients of
/// the standardized MSE loss at a seeded initialization. Each term is
/// |a - n| / max(|a|, |n|, 1e-3 * max_k |a_k|), so entries far below the
/// gradient scale are compared absolutely.
double gradient_check(const ModelSpec& spec, const Examples& batch, double epsilon, std::uint64_t seed = 0);

struct AblationRow {
  int horizon = 0;
  double mean_mse = 0.0;
  double sd_mse = 0.0;  ///< sample standard deviation across repeats
  std::vector<double> mse;
};

/// Trains `repeats` models per horizon on windows of `train_ds`, scored on
/// `val_ds`. Repeat r uses seed derive_seed(hyper.seed, r) for every horizon.
std::vector<AblationRow> horizon_ablation(const ModelSpec& spec, const Dataset& train_ds, const Dataset& val_ds,
                                          const std::vector<int>& horizons, int repeats, const TrainHyper& hyper,
                                          int jobs = 1);

inline constexpr int kModelSchemaVersion = 1;

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);
/// An ensemble file; a single model is an ensemble of one.
nlohmann::json to_json(const Ensemble& ensemble);
Ensemble ensemble_from_json(const nlohmann::json& j);

}  // namespace cablecal
