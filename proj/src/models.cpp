#include "cablecal/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cablecal/error.hpp"
#include "cablecal/lasso.hpp"
#include "cablecal/parallel.hpp"
#include "cablecal/rng.hpp"

namespace cablecal {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

constexpr double kInputScaleFloor = 1e-12;
constexpr double kTargetScaleFloor = 1e-9;

/// Raw rows -> standardized columns.
MatrixXd standardize_inputs(const MatrixXd& x, const Normalization& n) {
  return ((x.rowwise() - n.x_mean.transpose()).array().rowwise() / n.x_scale.transpose().array())
      .matrix()
      .transpose();
}

MatrixXd standardize_targets(const MatrixXd& y, const Normalization& n) {
  return ((y.rowwise() - n.y_mean.transpose()).array().rowwise() / n.y_scale.transpose().array())
      .matrix()
      .transpose();
}

void check_examples(const ModelSpec& spec, const Examples& ex, const char* what) {
  const auto& o = ex.options;
  if (o.horizon != spec.horizon || o.input != spec.input || o.output != spec.output ||
      o.direction != spec.direction || o.joints != spec.joints)
    throw Error(Errc::shape_mismatch, std::string(what) + " examples were built for a different spec");
  if (ex.x.cols() != spec.input_size() || ex.y.cols() != spec.joint_count())
    throw Error(Errc::shape_mismatch, std::string(what) + " examples have the wrong width");
}

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void ModelSpec::validate() const {
  if (direction == Direction::inverse && input == InputFormat::est)
    throw Error(Errc::format_violation, "inverse models only take the cmd input format");
  if (horizon < 0) throw Error(Errc::invalid_argument, "horizon must be non-negative");
  if (arch != Arch::linear && hidden < 1) throw Error(Errc::invalid_argument, "hidden units must be positive");
  if (arch == Arch::ff && layers < 1) throw Error(Errc::invalid_argument, "ff needs at least one hidden layer");
  if (arch == Arch::rnn && layers < 0) throw Error(Errc::invalid_argument, "head layers must be non-negative");
  if (!(lambda >= 0.0)) throw Error(Errc::invalid_argument, "lambda must be non-negative");
}

ExampleOptions ModelSpec::example_options() const {
  ExampleOptions o;
  o.horizon = horizon;
  o.input = input;
  o.output = output;
  o.direction = direction;
  o.joints = joints;
  return o;
}

nn::NetworkShape ModelSpec::network_shape() const {
  nn::NetworkShape s;
  s.arch = arch;
  s.step_size = joint_count();
  s.steps = horizon + 1;
  s.outputs = joint_count();
  s.hidden = hidden;
  s.layers = layers;
  return s;
}

std::string ModelSpec::name() const {
  std::ostringstream os;
  os << to_string(arch) << '-' << to_string(input) << '-' << to_string(output) << "-h" << horizon << '-'
     << to_string(direction);
  return os.str();
}

Normalization Normalization::fit(const Examples& ex, int joints) {
  if (ex.rows() == 0) throw Error(Errc::invalid_argument, "cannot normalize an empty example set");
  const Eigen::Index blocks = ex.x.cols() / joints;
  Normalization n;
  n.x_mean.resize(ex.x.cols());
  n.x_scale.resize(ex.x.cols());
  for (int j = 0; j < joints; ++j) {
    double sum = 0.0, sq = 0.0;
    for (Eigen::Index k = 0; k < blocks; ++k) sum += ex.x.col(k * joints + j).sum();
    const double count = static_cast<double>(blocks * ex.rows());
    const double mean = sum / count;
    for (Eigen::Index k = 0; k < blocks; ++k) sq += (ex.x.col(k * joints + j).array() - mean).square().sum();
    const double sd = std::sqrt(sq / count);
    for (Eigen::Index k = 0; k < blocks; ++k) {
      n.x_mean[k * joints + j] = mean;
      n.x_scale[k * joints + j] = sd > kInputScaleFloor ? sd : 1.0;
    }
  }
  n.y_mean = ex.y.colwise().mean().transpose();
  n.y_scale.resize(ex.y.cols());
  for (Eigen::Index j = 0; j < ex.y.cols(); ++j) {
    const double sd = std::sqrt((ex.y.col(j).array() - n.y_mean[j]).square().mean());
    n.y_scale[j] = std::max(sd, kTargetScaleFloor);
  }
  return n;
}

void Normalization::validate() const {
  if (x_mean.size() != x_scale.size() || y_mean.size() != y_scale.size())
    throw Error(Errc::shape_mismatch, "normalization vectors differ in length");
  if (!(x_scale.array() > 0.0).all() || !(y_scale.array() > 0.0).all())
    throw Error(Errc::invalid_argument, "normalization scales must be positive");
}

Model::Model(ModelSpec spec, Normalization norm, VectorXd params, TrainingMeta meta)
    : spec_(std::move(spec)), norm_(std::move(norm)), params_(std::move(params)), meta_(std::move(meta)) {
  spec_.validate();
  norm_.validate();
  auto net = nn::make_network(spec_.network_shape());
  if (params_.size() != net->num_params()) throw Error(Errc::shape_mismatch, "parameter count does not match spec");
  if (norm_.x_mean.size() != spec_.input_size() || norm_.y_mean.size() != spec_.joint_count())
    throw Error(Errc::shape_mismatch, "normalization does not match spec");
  net_ = std::move(net);
}

const nn::Network& Model::network() const {
  if (!net_) throw Error(Errc::untrained_model, "model has no weights");
  return *net_;
}

MatrixXd Model::predict_rows(const MatrixXd& x) const {
  const auto& net = network();
  if (x.cols() != spec_.input_size())
    throw Error(Errc::shape_mismatch, "window has " + std::to_string(x.cols()) + " features, model expects " +
                                          std::to_string(spec_.input_size()));
  const MatrixXd out = net.forward(params_, standardize_inputs(x, norm_), nullptr);
  MatrixXd y = (out.transpose().array().rowwise() * norm_.y_scale.transpose().array()).matrix();
  y.rowwise() += norm_.y_mean.transpose();
  if (spec_.output == OutputFormat::delta) y += x.leftCols(spec_.joint_count());
  return y;
}

VectorXd Model::predict(const VectorXd& x) const { return predict_rows(x.transpose()).row(0).transpose(); }

Ensemble::Ensemble(std::vector<Model> members) : members_(std::move(members)) {
  if (members_.empty()) throw Error(Errc::invalid_argument, "ensemble needs at least one member");
  for (const auto& m : members_) {
    if (!m.trained()) throw Error(Errc::untrained_model, "ensemble member has no weights");
    if (to_json(m.spec()) != to_json(members_.front().spec()))
      throw Error(Errc::shape_mismatch, "ensemble members must share one spec");
  }
}

const ModelSpec& Ensemble::spec() const {
  if (members_.empty()) throw Error(Errc::untrained_model, "empty ensemble");
  return members_.front().spec();
}

MatrixXd Ensemble::predict_rows(const MatrixXd& x) const {
  spec();
  MatrixXd sum = members_.front().predict_rows(x);
  for (std::size_t k = 1; k < members_.size(); ++k) sum += members_[k].predict_rows(x);
  return sum / static_cast<double>(members_.size());
}

VectorXd Ensemble::predict(const VectorXd& x) const { return predict_rows(x.transpose()).row(0).transpose(); }

MatrixXd absolute_targets(const Examples& ex) { return ex.y + ex.base; }

double prediction_mse(const MatrixXd& pred, const Examples& ex) {
  if (pred.rows() != ex.rows() || pred.cols() != ex.y.cols())
    throw Error(Errc::shape_mismatch, "prediction shape does not match examples");
  return (pred - absolute_targets(ex)).array().square().mean();
}

double baseline_mse(const Examples& ex) {
  return (ex.x.leftCols(ex.y.cols()) - absolute_targets(ex)).array().square().mean();
}

Model train(const ModelSpec& spec, const Examples& tr, const Examples& val, const TrainHyper& hyper,
            const std::string& dataset_hash) {
  spec.validate();
  if (tr.rows() == 0) throw Error(Errc::invalid_argument, "empty training set");
  check_examples(spec, tr, "training");
  if (val.rows() > 0) check_examples(spec, val, "validation");
  if (hyper.epochs < 1 || hyper.batch < 1 || !(hyper.learning_rate > 0.0))
    throw Error(Errc::invalid_argument, "epochs, batch and learning rate must be positive");

  const Normalization norm = Normalization::fit(tr, spec.joint_count());
  const MatrixXd xs = standardize_inputs(tr.x, norm);
  const MatrixXd ys = standardize_targets(tr.y, norm);
  const auto net = nn::make_network(spec.network_shape());
  TrainingMeta meta;
  meta.seed = hyper.seed;
  meta.dataset_hash = dataset_hash;
  VectorXd params;

  if (spec.arch == Arch::linear) {
    LassoOptions lo;
    lo.lambda = spec.lambda;
    const LassoResult fit = lasso_fit(xs.transpose(), ys.transpose(), lo);
    params.resize(net->num_params());
    const auto& blocks = net->blocks();
    Eigen::Map<MatrixXd>(params.data() + blocks[0].offset, blocks[0].rows, blocks[0].cols) = fit.a.transpose();
    params.segment(blocks[1].offset, blocks[1].size()) = fit.b;
    const MatrixXd resid = net->forward(params, xs, nullptr) - ys;
    meta.loss_curve.push_back(resid.array().square().mean());
    meta.epochs = fit.sweeps;
  } else {
    Rng rng = make_rng(hyper.seed);
    params = net->init(rng);
    const Eigen::Index n = xs.cols();
    const Eigen::Index np = params.size();
    VectorXd m1 = VectorXd::Zero(np), m2 = VectorXd::Zero(np), grad(np);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const int decay1 = static_cast<int>(0.6 * hyper.epochs), decay2 = static_cast<int>(0.8 * hyper.epochs);
    nn::Tape tape;
    long step = 0;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
      double lr = hyper.learning_rate;
      if (epoch >= decay1) lr *= hyper.decay;
      if (epoch >= decay2) lr *= hyper.decay;
      std::shuffle(order.begin(), order.end(), rng);
      double epoch_loss = 0.0;
      for (Eigen::Index start = 0; start < n; start += hyper.batch) {
        const Eigen::Index len = std::min<Eigen::Index>(hyper.batch, n - start);
        const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + len);
        const MatrixXd xb = xs(Eigen::all, idx);
        const MatrixXd yb = ys(Eigen::all, idx);
        const MatrixXd diff = net->forward(params, xb, &tape) - yb;
        const double loss = diff.array().square().mean();
        if (!std::isfinite(loss))
          throw Error(Errc::divergence, "training loss became non-finite at epoch " + std::to_string(epoch) +
                                            ", step " + std::to_string(step));
        epoch_loss += loss * static_cast<double>(len);
        grad.setZero();
        net->backward(params, tape, (2.0 / static_cast<double>(diff.size())) * diff, grad);
        ++step;
        m1 = beta1 * m1 + (1.0 - beta1) * grad;
        m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        params.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
      }
      meta.loss_curve.push_back(epoch_loss / static_cast<double>(n));
    }
    meta.epochs = hyper.epochs;
  }

  Model model(spec, norm, std::move(params), meta);
  TrainingMeta final_meta = model.meta();
  if (val.rows() > 0) {
    final_meta.val_mse = prediction_mse(model.predict_rows(val.x), val);
    final_meta.baseline_mse = baseline_mse(val);
  }
  return Model(model.spec(), model.normalization(), model.params(), std::move(final_meta));
}

Ensemble train_ensemble(const ModelSpec& spec, const Examples& tr, const Examples& val, const TrainHyper& hyper,
                        int members, int jobs, const std::string& dataset_hash) {
  if (members < 1) throw Error(Errc::invalid_argument, "ensemble needs at least one member");
  std::vector<Model> out(static_cast<std::size_t>(members));
  parallel_for(out.size(), jobs, [&](std::size_t k) {
    TrainHyper h = hyper;
    h.seed = derive_seed(hyper.seed, k);
    out[k] = train(spec, tr, val, h, dataset_hash);
  });
  return Ensemble(std::move(out));
}

MatrixXd rollout_est(const Ensemble& model, const std::vector<JointConfig>& commands) {
  const ModelSpec& spec = model.spec();
  if (spec.direction != Direction::forward || spec.input != InputFormat::est)
    throw Error(Errc::direction_mismatch, "rollout needs a forward est-format model");
  const int nj = spec.joint_count(), j0 = first_joint(spec.joints), h = spec.horizon;
  const auto n = static_cast<Eigen::Index>(commands.size());
  MatrixXd pred(n, nj);
  VectorXd x(spec.input_size());
  for (Eigen::Index t = 0; t < n; ++t) {
    x.head(nj) = commands[static_cast<std::size_t>(t)].q.segment(j0, nj);
    for (int k = 1; k <= h; ++k) {
      const Eigen::Index s = std::max<Eigen::Index>(t - k, 0);
      x.segment(k * nj, nj) = s < h ? VectorXd(commands[static_cast<std::size_t>(s)].q.segment(j0, nj))
                                    : VectorXd(pred.row(s).transpose());
    }
    pred.row(t) = model.predict(x).transpose();
  }
  return pred;
}

double gradient_check(const ModelSpec& spec, const Examples& batch, double epsilon, std::uint64_t seed) {
  spec.validate();
  check_examples(spec, batch, "gradient-check");
  if (!(epsilon >= 1e-7 && epsilon <= 1e-4)) throw Error(Errc::invalid_argument, "epsilon must be in [1e-7, 1e-4]");
  const Normalization norm = Normalization::fit(batch, spec.joint_count());
  const MatrixXd xs = standardize_inputs(batch.x, norm);
  const MatrixXd ys = standardize_targets(batch.y, norm);
  const auto net = nn::make_network(spec.network_shape());
  Rng rng = make_rng(seed);
  VectorXd p = net->init(rng);
  auto loss = [&](const VectorXd& q) { return (net->forward(q, xs, nullptr) - ys).array().square().mean(); };

  nn::Tape tape;
  const MatrixXd diff = net->forward(p, xs, &tape) - ys;
  VectorXd grad = VectorXd::Zero(p.size());
  net->backward(p, tape, (2.0 / static_cast<double>(diff.size())) * diff, grad);
  const double floor = 1e-3 * grad.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + epsilon;
    const double up = loss(p);
    p[i] = keep - epsilon;
    const double down = loss(p);
    p[i] = keep;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(grad[i]), std::abs(numeric), floor});
    if (denom > 0.0) worst = std::max(worst, std::abs(grad[i] - numeric) / denom);
  }
  return worst;
}

std::vector<AblationRow> horizon_ablation(const ModelSpec& spec, const Dataset& train_ds, const Dataset& val_ds,
                                          const std::vector<int>& horizons, int repeats, const TrainHyper& hyper,
                                          int jobs) {
  if (horizons.empty()) throw Error(Errc::invalid_argument, "horizon list is empty");
  if (repeats < 1) throw Error(Errc::invalid_argument, "repeats must be positive");
  const std::size_t nh = horizons.size(), nr = static_cast<std::size_t>(repeats);
  std::vector<Examples> tr(nh), va(nh);
  std::vector<ModelSpec> specs(nh, spec);
  for (std::size_t i = 0; i < nh; ++i) {
    specs[i].horizon = horizons[i];
    tr[i] = make_examples(train_ds, specs[i].example_options());
    va[i] = make_examples(val_ds, specs[i].example_options());
  }
  std::vector<double> mse(nh * nr);
  const std::string hash = train_ds.hash();
  parallel_for(mse.size(), jobs, [&](std::size_t cell) {
    const std::size_t i = cell / nr, r = cell % nr;
    TrainHyper h = hyper;
    h.seed = derive_seed(hyper.seed, r);
    mse[cell] = train(specs[i], tr[i], va[i], h, hash).meta().val_mse;
  });
  std::vector<AblationRow> rows(nh);
  for (std::size_t i = 0; i < nh; ++i) {
    auto& row = rows[i];
    row.horizon = horizons[i];
    row.mse.assign(mse.begin() + static_cast<std::ptrdiff_t>(i * nr),
                   mse.begin() + static_cast<std::ptrdiff_t>((i + 1) * nr));
    row.mean_mse = std::accumulate(row.mse.begin(), row.mse.end(), 0.0) / static_cast<double>(nr);
    double ss = 0.0;
    for (double v : row.mse) ss += (v - row.mean_mse) * (v - row.mean_mse);
    row.sd_mse = nr > 1 ? std::sqrt(ss / static_cast<double>(nr - 1)) : 0.0;
  }
  return rows;
}

json to_json(const ModelSpec& s) {
  return {{"arch", to_string(s.arch)},           {"input", to_string(s.input)},
          {"output", to_string(s.output)},       {"horizon", s.horizon},
          {"direction", to_string(s.direction)}, {"hidden", s.hidden},
          {"layers", s.layers},                  {"lambda", s.lambda},
          {"joints", to_string(s.joints)}};
}

ModelSpec spec_from_json(const json& j) {
  try {
    ModelSpec s;
    s.arch = parse_arch(j.at("arch").get<std::string>());
    s.input = parse_input_format(j.at("input").get<std::string>());
    s.output = parse_output_format(j.at("output").get<std::string>());
    s.horizon = j.at("horizon").get<int>();
    s.direction = parse_direction(j.at("direction").get<std::string>());
    s.hidden = j.value("hidden", s.hidden);
    s.layers = j.value("layers", s.layers);
    s.lambda = j.value("lambda", s.lambda);
    if (j.contains("joints")) s.joints = parse_joint_set(j.at("joints").get<std::string>());
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("model spec: ") + e.what());
  }
}

json to_json(const Model& m) {
  const auto& net = m.network();
  json weights = json::object();
  for (const auto& b : net.blocks()) {
    const Eigen::Map<const MatrixXd> w(m.params().data() + b.offset, b.rows, b.cols);
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(b.size()));
    for (Eigen::Index r = 0; r < b.rows; ++r)
      for (Eigen::Index c = 0; c < b.cols; ++c) row_major.push_back(w(r, c));
    weights[b.name] = {{"shape", {b.rows, b.cols}}, {"data", row_major}};
  }
  const auto& n = m.normalization();
  const auto& meta = m.meta();
  return {{"schema_version", kModelSchemaVersion},
          {"spec", to_json(m.spec())},
          {"normalization",
           {{"x_mean", vec_json(n.x_mean)},
            {"x_scale", vec_json(n.x_scale)},
            {"y_mean", vec_json(n.y_mean)},
            {"y_scale", vec_json(n.y_scale)}}},
          {"weights", weights},
          {"training_meta",
           {{"loss_curve", meta.loss_curve},
            {"seed", meta.seed},
            {"dataset_hash", meta.dataset_hash},
            {"val_mse", meta.val_mse},
            {"baseline_mse", meta.baseline_mse},
            {"epochs", meta.epochs}}}};
}

Model model_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kModelSchemaVersion)
      throw Error(Errc::parse, "unsupported model schema version");
    const ModelSpec spec = spec_from_json(j.at("spec"));
    const auto& jn = j.at("normalization");
    Normalization n{vec_from_json(jn.at("x_mean")), vec_from_json(jn.at("x_scale")), vec_from_json(jn.at("y_mean")),
                    vec_from_json(jn.at("y_scale"))};
    const auto net = nn::make_network(spec.network_shape());
    VectorXd params(net->num_params());
    const auto& jw = j.at("weights");
    for (const auto& b : net->blocks()) {
      const auto& e = jw.at(b.name);
      const auto shape = e.at("shape").get<std::vector<Eigen::Index>>();
      const auto data = e.at("data").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] != b.rows || shape[1] != b.cols ||
          static_cast<Eigen::Index>(data.size()) != b.size())
        throw Error(Errc::shape_mismatch, "weight block '" + b.name + "' has the wrong shape");
      Eigen::Map<MatrixXd> w(params.data() + b.offset, b.rows, b.cols);
      for (Eigen::Index r = 0; r < b.rows; ++r)
        for (Eigen::Index c = 0; c < b.cols; ++c) w(r, c) = data[static_cast<std::size_t>(r * b.cols + c)];
    }
    TrainingMeta meta;
    if (j.contains("training_meta")) {
      const auto& jm = j.at("training_meta");
      meta.loss_curve = jm.value("loss_curve", std::vector<double>{});
      meta.seed = jm.value("seed", std::uint64_t{0});
      meta.dataset_hash = jm.value("dataset_hash", std::string{});
      meta.val_mse = jm.value("val_mse", 0.0);
      meta.baseline_mse = jm.value("baseline_mse", 0.0);
      meta.epochs = jm.value("epochs", 0);
    }
    return Model(spec, std::move(n), std::move(params), std::move(meta));
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("model file: ") + e.what());
  }
}

json to_json(const Ensemble& e) {
  json members = json::array();
  for (const auto& m : e.members()) members.push_back(to_json(m));
  return {{"schema_version", kModelSchemaVersion}, {"kind", "ensemble"}, {"members", members}};
}

Ensemble ensemble_from_json(const json& j) {
  try {
    if (j.contains("spec")) return Ensemble({model_from_json(j)});
    if (j.at("schema_version").get<int>() != kModelSchemaVersion)
      throw Error(Errc::parse, "unsupported model schema version");
    std::vector<Model> members;
    for (const auto& m : j.at("members")) members.push_back(model_from_json(m));
    return Ensemble(std::move(members));
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("ensemble file: ") + e.what());
  }
}

}  // namespace cablecal
