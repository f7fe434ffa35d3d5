#include <doctest.h>

#include <cmath>

#include "cablecal/error.hpp"
#include "cablecal/plant.hpp"

using namespace cablecal;

namespace {

JointConfig cmd(double q4, double q5, double q6) {
  Vec6 q;
  q << 0.0, 0.0, 0.1, q4, q5, q6;
  return JointConfig(q);
}

std::vector<JointConfig> random_commands(int n, std::uint64_t seed, const KinematicParams& p) {
  Rng rng(seed);
  std::vector<JointConfig> out;
  for (int i = 0; i < n; ++i) {
    Vec6 q;
    for (int j = 0; j < 6; ++j) q[j] = uniform(rng, p.joint_limits[j].first, p.joint_limits[j].second);
    out.emplace_back(q);
  }
  return out;
}

}  // namespace

TEST_CASE("backlash operator") {
  CHECK(backlash(0.2, 0.2, 0.1) == 0.2);
  CHECK(backlash(1.0, 0.0, 0.1) == doctest::Approx(0.95));
  CHECK(backlash(-1.0, 0.0, 0.1) == doctest::Approx(-0.95));
  CHECK(backlash(0.03, 0.0, 0.1) == 0.0);
}

TEST_CASE("backlash hysteresis loop area") {
  // Scalar oracle: ramp from -A to A and back, integrate y du. The loop is a
  // parallelogram of height w over the effective sweep 2A - w.
  const double width = 0.1, amp = 1.0;
  const int n = 20000;
  double y = -amp + width / 2;
  double area = 0.0;
  double u_prev = -amp;
  for (int pass = 0; pass < 2; ++pass) {
    for (int i = 1; i <= n; ++i) {
      const double s = static_cast<double>(i) / n;
      const double u = pass == 0 ? -amp + 2 * amp * s : amp - 2 * amp * s;
      const double y_next = backlash(u, y, width);
      area += 0.5 * (y + y_next) * (u - u_prev);
      y = y_next;
      u_prev = u;
      CHECK(std::abs(y - u) <= width / 2 + 1e-12);
    }
  }
  CHECK(std::abs(std::abs(area) - width * (2 * amp - width)) < 1e-6);
}

TEST_CASE("identity plant reproduces commands exactly") {
  KinematicParams p;
  Plant plant(PlantConfig::identity(), p);
  plant.reset(cmd(0, 0, 0));
  for (const auto& c : random_commands(300, 1, p)) {
    const JointConfig out = plant.step(c);
    CHECK(out.q == c.q);
    CHECK(out.role == Role::physical);
  }
}

TEST_CASE("q5 motion couples into q6") {
  KinematicParams p;
  PlantConfig cfg;
  cfg.coupling_56 = 0.3;
  Plant plant(cfg, p);
  plant.reset(cmd(0, 0, 0));
  const auto before = plant.step(cmd(0, 0, 0));
  const auto after = plant.step(cmd(0, 0.2, 0));
  CHECK(after[5] - before[5] == doctest::Approx(0.06).epsilon(1e-12));
  CHECK(after[4] - before[4] == doctest::Approx(0.2).epsilon(1e-12));

  PlantConfig none;
  Plant free(none, p);
  free.reset(cmd(0, 0, 0));
  free.step(cmd(0, 0, 0));
  CHECK(free.step(cmd(0, 0.2, 0))[5] == 0.0);
}

TEST_CASE("q4 motion couples into q5") {
  KinematicParams p;
  PlantConfig cfg;
  cfg.coupling_45 = 0.1;
  Plant plant(cfg, p);
  plant.reset(cmd(0, 0, 0));
  CHECK(plant.step(cmd(0.5, 0, 0))[4] == doctest::Approx(0.05));
}

TEST_CASE("default plant replays bit-identically") {
  KinematicParams p;
  const auto commands = random_commands(270, 2, p);
  Plant a(PlantConfig::standard(), p), b(PlantConfig::standard(), p);
  a.reset(commands.front());
  b.reset(commands.front());
  for (const auto& c : commands) CHECK(a.step(c).q == b.step(c).q);

  a.reset(commands.front());
  Plant c(PlantConfig::standard(), p);
  c.reset(commands.front());
  for (const auto& q : commands) CHECK(a.step(q).q == c.step(q).q);
}

TEST_CASE("reset semantics") {
  KinematicParams p;
  PlantConfig cfg;
  cfg.backlash_width = {0, 0, 0, 0, 0, 0};
  Plant plant(cfg, p);
  const auto q0 = cmd(0.3, -0.2, 0.1);
  plant.reset(q0);
  CHECK(plant.step(q0).q == q0.q);

  // the first branch taken depends on where the mechanism rests
  PlantConfig wide;
  wide.backlash_width = {0, 0, 0, 0.2, 0.2, 0.2};
  Plant w(wide, p);
  w.reset(cmd(0.0, 0.0, 0.0));
  const double from_below = w.step(cmd(0.5, 0, 0))[3];
  w.reset(cmd(1.0, 0.0, 0.0));
  const double from_above = w.step(cmd(0.5, 0, 0))[3];
  CHECK(from_below == doctest::Approx(0.4));
  CHECK(from_above == doctest::Approx(0.6));
}

TEST_CASE("wrist output stays within the play band plus coupling") {
  KinematicParams p;
  PlantConfig cfg = PlantConfig::standard();
  cfg.noise_sd = {};
  Plant plant(cfg, p);
  const auto commands = random_commands(500, 3, p);
  plant.reset(commands.front());
  Vec6 prev_mech = plant.state().mechanism;
  for (const auto& c : commands) {
    const auto out = plant.step(c);
    for (int i = 3; i < 6; ++i) {
      const double u = c[i] * (1 + cfg.stretch_gain[i]);
      // coupling contributions are bounded by the partner's total increment
      const double coupling_bound = 2.0 * (std::abs(cfg.coupling_56) + std::abs(cfg.coupling_45)) *
                                    (out.q - prev_mech).cwiseAbs().maxCoeff();
      CHECK(std::abs(out[i] - u) <= cfg.backlash_width[i] / 2 + coupling_bound + 1e-12);
    }
    prev_mech = plant.state().mechanism;
  }
}

TEST_CASE("default plant error magnitudes") {
  KinematicParams p;
  Plant plant(PlantConfig::standard(), p);
  const auto commands = random_commands(2000, 4, p);
  plant.reset(commands.front());
  Vec6 acc = Vec6::Zero();
  for (const auto& c : commands) acc += (plant.step(c).q - c.q).cwiseAbs2();
  const Vec6 rms = (acc / commands.size()).cwiseSqrt();
  MESSAGE("rms deg: " << rad2deg(rms[0]) << " " << rad2deg(rms[1]) << " " << rad2deg(rms[3]) << " "
                      << rad2deg(rms[4]) << " " << rad2deg(rms[5]));
  CHECK(rad2deg(rms[0]) < 0.1);
  CHECK(rad2deg(rms[1]) < 0.1);
  const double wrist_rms = std::sqrt((rms[3] * rms[3] + rms[4] * rms[4] + rms[5] * rms[5]) / 3.0);
  CHECK(rad2deg(wrist_rms) >= 5.0);
  CHECK(rad2deg(wrist_rms) <= 25.0);
  for (int i = 3; i < 6; ++i) CHECK(rms[i] > 0.0);
}

TEST_CASE("plant rejects out-of-limit commands and bad configs") {
  KinematicParams p;
  Plant plant(PlantConfig::standard(), p);
  try {
    plant.step(cmd(3.0, 0, 0));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::limit_violation);
  }
  PlantConfig bad;
  bad.coupling_56 = 1.2;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK(PlantConfig::standard().hash() == PlantConfig::standard().hash());
  CHECK(PlantConfig::standard().hash() != PlantConfig::identity().hash());
}
