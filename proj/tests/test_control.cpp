#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cablecal/control.hpp"

using namespace cablecal;

namespace {

const KinematicParams kp;

JointConfig desired(const Vec6& q) { return JointConfig(q, Role::desired); }

Vec6 mid() {
  Vec6 q;
  q << 0.05, -0.1, 0.12, 0.3, -0.2, 0.4;
  return q;
}

std::shared_ptr<const Ensemble> fit(const PlantConfig& cfg, const ModelSpec& spec, int epochs = 1) {
  const auto tr = sample_pick_place_waypoints(Workspace::standard(), 600, kp, 1).configs;
  Plant plant(cfg, kp);
  const Dataset ds = collect(tr, plant, {});
  TrainHyper h;
  h.epochs = epochs;
  return std::make_shared<Ensemble>(
      std::vector<Model>{train(spec, make_examples(ds, spec.example_options()), {}, h)});
}

}  // namespace

TEST_CASE("identity forward map leaves the target unchanged") {
  for (int m : {1, 3, 7})
    for (double a : {0.2, 0.5, 1.0}) {
      const auto r = refine_command(desired(mid()), [](const Vec6& q) { return q; }, m, a, kp);
      CHECK(r.command.q == mid());
      CHECK_FALSE(r.clamped);
    }
}

TEST_CASE("constant bias is compensated in one full step") {
  Vec6 delta;
  delta << 0.0, 0.0, 0.0, 0.1, -0.05, 0.2;
  const auto r = refine_command(desired(mid()), [&](const Vec6& q) { return Vec6(q + delta); }, 1, 1.0, kp);
  CHECK((r.command.q - (mid() - delta)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("scalar gain follows the fixed-point recurrence") {
  const double gain = 1.2, alpha = 0.5;
  std::vector<double> residuals;
  const auto r = refine_command(desired(mid()), [&](const Vec6& q) { return Vec6(gain * q); }, 3, alpha, kp,
                                &residuals);
  for (int j = 3; j < 6; ++j) {
    double c = mid()[j];
    for (int i = 0; i < 3; ++i) c = c + alpha * (mid()[j] - gain * c);
    CHECK(std::abs(r.command.q[j] - c) < 1e-15);
  }
  REQUIRE(residuals.size() == 4);
  for (std::size_t i = 1; i < residuals.size(); ++i)
    CHECK(residuals[i] / residuals[i - 1] == doctest::Approx(std::abs(1.0 - gain * alpha)).epsilon(1e-12));
}

TEST_CASE("affine maps: exact with unit gain, monotone residual otherwise") {
  Vec6 c;
  c << 0.0, 0.0, 0.0, -0.03, 0.07, 0.02;
  std::vector<double> res;
  refine_command(desired(mid()), [&](const Vec6& q) { return Vec6(q + c); }, 1, 1.0, kp, &res);
  CHECK(res.back() < 1e-15);

  Vec6 gain;
  gain << 1.0, 1.0, 1.0, 1.2, 0.8, 1.5;
  refine_command(desired(mid()), [&](const Vec6& q) { return Vec6(gain.cwiseProduct(q) + c); }, 8, 0.5, kp, &res);
  for (std::size_t i = 1; i < res.size(); ++i) CHECK(res[i] <= res[i - 1]);
}

TEST_CASE("refinement keeps arm joints and clamps to limits") {
  Vec6 q = mid();
  q[5] = kp.joint_limits[5].second - 0.01;
  const auto r = refine_command(desired(q), [](const Vec6& x) { return Vec6(x - Vec6::Constant(0.2)); }, 3, 0.5, kp);
  CHECK(r.command.q.head<3>() == q.head<3>());
  CHECK(r.clamped);
  CHECK(within_limits(r.command.q, kp));
  CHECK_THROWS_AS(refine_command(desired(q), [](const Vec6& x) { return x; }, 0, 0.5, kp), Error);
  CHECK_THROWS_AS(refine_command(desired(q), [](const Vec6& x) { return x; }, 1, 1.5, kp), Error);
}

TEST_CASE("history is bounded and ordered newest last") {
  History h(3);
  h.fill(Vec6::Zero());
  CHECK(h.size() == 3);
  for (int i = 1; i <= 5; ++i) h.push(Vec6::Constant(i), Vec6::Constant(-i));
  CHECK(h.size() == 3);
  CHECK(h.command(1)[0] == 5.0);
  CHECK(h.command(3)[0] == 3.0);
  CHECK(h.estimate(1)[0] == -5.0);
}

TEST_CASE("model direction and history length are checked") {
  ModelSpec fwd;
  fwd.arch = Arch::linear;
  fwd.horizon = 2;
  const auto f = fit(PlantConfig::identity(), fwd);
  ControllerConfig c;
  c.kind = ControllerKind::inverse_direct;
  c.model = f;
  try {
    c.validate();
    FAIL("expected mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::direction_mismatch);
  }
  CHECK_THROWS_AS(inverse_command(desired(mid()), *f, History(2), kp), Error);
  History short_history(1);
  short_history.fill(mid());
  try {
    refine_command(desired(mid()), *f, short_history, 3, 0.5, kp);
    FAIL("expected history error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::history_too_long);
  }
  c.kind = ControllerKind::forward_refine;
  c.model.reset();
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("inverse model of the identity plant commands the target") {
  ModelSpec s;
  s.arch = Arch::linear;
  s.horizon = 2;
  s.direction = Direction::inverse;
  s.output = OutputFormat::abs;
  const auto g = fit(PlantConfig::identity(), s);
  History tau(2);
  tau.fill(mid());
  const auto r = inverse_command(desired(mid()), *g, tau, kp);
  CHECK((r.command.q - mid()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("linear inverse model composed with a linear plant is near identity") {
  PlantConfig cfg = PlantConfig::identity();
  cfg.stretch_gain = {0, 0, 0, 0.05, -0.04, 0.08};
  cfg.noise_sd = {0, 0, 0, 0.002, 0.002, 0.002};
  ModelSpec s;
  s.arch = Arch::linear;
  s.horizon = 1;
  s.direction = Direction::inverse;
  s.output = OutputFormat::abs;
  s.lambda = 0.0;
  const auto g = fit(cfg, s);
  const double fit_mse = [&] {
    const auto va = sample_pick_place_waypoints(Workspace::standard(), 300, kp, 2).configs;
    Plant p(cfg, kp);
    const auto ex = make_examples(collect(va, p, {}), s.example_options());
    return prediction_mse(g->predict_rows(ex.x), ex);
  }();
  ControllerConfig c;
  c.kind = ControllerKind::inverse_direct;
  c.model = g;
  Plant plant(cfg, kp);
  const auto targets = sample_pick_place_waypoints(Workspace::standard(), 300, kp, 3).configs;
  const auto rep = track_trajectory(c, plant, targets);
  double mse = 0.0;
  for (const auto& r : rep.rows) mse += r.joint_err.tail<3>().squaredNorm() / 3.0;
  mse /= static_cast<double>(rep.rows.size());
  CHECK(mse < 2.0 * fit_mse);
}

TEST_CASE("passthrough tracking") {
  const auto targets = sample_pick_place_waypoints(Workspace::standard(), 240, kp, 4).configs;
  ControllerConfig pass;
  Plant ident(PlantConfig::identity(), kp);
  for (const auto& r : track_trajectory(pass, ident, targets).rows) {
    CHECK(r.cart_err_mm == 0.0);
    CHECK(r.joint_err.cwiseAbs().maxCoeff() == 0.0);
  }
  Plant plant(PlantConfig::standard(), kp);
  const auto rep = track_trajectory(pass, plant, targets);
  double mean = 0.0;
  for (const auto& r : rep.rows) {
    mean += r.cart_err_mm;
    CHECK(r.qc == r.qd);
  }
  mean /= static_cast<double>(rep.rows.size());
  CHECK(mean > 1.0);
  CHECK(mean < 10.0);
}

TEST_CASE("controllers never look ahead and always pass arm joints through") {
  ModelSpec s;
  s.arch = Arch::ff;
  s.hidden = 8;
  s.horizon = 3;
  ControllerConfig c;
  c.kind = ControllerKind::forward_refine;
  c.model = fit(PlantConfig::standard(), s, 2);
  auto a = sample_pick_place_waypoints(Workspace::standard(), 80, kp, 5).configs;
  auto b = a;
  for (std::size_t i = 40; i < b.size(); ++i) b[i] = b[39];
  Plant pa(PlantConfig::standard(), kp), pb(PlantConfig::standard(), kp);
  const auto ra = track_trajectory(c, pa, a), rb = track_trajectory(c, pb, b);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(ra.rows[i].qc == rb.rows[i].qc);
    CHECK(ra.rows[i].qp == rb.rows[i].qp);
  }
  for (const auto& r : ra.rows) CHECK(r.qc.head<3>() == r.qd.head<3>());
}

TEST_CASE("tracking CSV layout") {
  ControllerConfig pass;
  Plant plant(PlantConfig::standard(), kp);
  const auto rep = track_trajectory(pass, plant, sample_pick_place_waypoints(Workspace::standard(), 5, kp, 1).configs);
  std::ostringstream os;
  write_tracking_csv(os, rep);
  std::istringstream is(os.str());
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 26);
    ++lines;
  }
  CHECK(lines == 6);
  CHECK(os.str().rfind("t,qd1,", 0) == 0);
}
