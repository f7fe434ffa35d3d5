#include "cablecal/plant.hpp"

#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>

#include "cablecal/error.hpp"

namespace cablecal {

PlantConfig PlantConfig::identity() { return PlantConfig{}; }

PlantConfig PlantConfig::standard() {
  PlantConfig c;
  c.backlash_width = {0.0, 0.0, 0.0, 0.15, 0.20, 0.35};
  c.stretch_gain = {0.0, 0.0, 0.0, 0.03, 0.05, 0.08};
  c.coupling_56 = 0.3;
  c.coupling_45 = 0.1;
  c.noise_sd = {0.0, 0.0, 0.0, 0.002, 0.002, 0.002};
  c.seed = 1;
  return c;
}

void PlantConfig::validate() const {
  for (int i = 0; i < 6; ++i) {
    if (!(backlash_width[i] >= 0.0)) throw Error(Errc::invalid_argument, "backlash width must be >= 0");
    if (!(noise_sd[i] >= 0.0)) throw Error(Errc::invalid_argument, "noise sd must be >= 0");
    if (!std::isfinite(stretch_gain[i]) || !std::isfinite(bias[i]))
      throw Error(Errc::invalid_argument, "non-finite plant parameter");
  }
  if (!(std::abs(coupling_56) < 1.0) || !(std::abs(coupling_45) < 1.0))
    throw Error(Errc::invalid_argument, "coupling magnitude must be below 1");
}

std::string PlantConfig::hash() const {
  // FNV-1a over the raw field bytes
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  auto mix_d = [&](double v) { mix(&v, sizeof v); };
  for (double v : backlash_width) mix_d(v);
  for (double v : stretch_gain) mix_d(v);
  mix_d(coupling_56);
  mix_d(coupling_45);
  for (double v : noise_sd) mix_d(v);
  for (double v : bias) mix_d(v);
  mix(&seed, sizeof seed);
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

double backlash(double u, double y_prev, double width) {
  const double half = 0.5 * width;
  if (u - half > y_prev) return u - half;
  if (u + half < y_prev) return u + half;
  return y_prev;
}

Plant::Plant(PlantConfig cfg, KinematicParams params) : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  reset(JointConfig{});
}

void Plant::reset(const JointConfig& q0) {
  state_.mechanism = q0.q;
  state_.last_output = JointConfig(q0.q + Eigen::Map<const Vec6>(cfg_.bias.data()), Role::physical);
  state_.step_count = 0;
  state_.rng = make_rng(cfg_.seed);
}

JointConfig Plant::step(const JointConfig& q_c) {
  check_limits(q_c.q, params_);
  Vec6 next = state_.mechanism;
  next.head<3>() = q_c.q.head<3>();

  // drive increments of the wrist play operators, before coupling
  Vec3 drive = Vec3::Zero();
  for (int k = 0; k < 3; ++k) {
    const int i = 3 + k;
    const double u = q_c.q[i] * (1.0 + cfg_.stretch_gain[i]);
    const double b = backlash(u, state_.mechanism[i], cfg_.backlash_width[i]);
    drive[k] = b - state_.mechanism[i];
    next[i] = b;
  }
  next[4] += cfg_.coupling_56 * drive[2] + cfg_.coupling_45 * drive[0];
  next[5] += cfg_.coupling_56 * drive[1];
  state_.mechanism = next;

  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec6 out = next;
  for (int i = 0; i < 6; ++i) {
    const double z = gauss(state_.rng);
    out[i] += cfg_.bias[i] + cfg_.noise_sd[i] * z;
  }
  ++state_.step_count;
  state_.last_output = JointConfig(out, Role::physical);
  return state_.last_output;
}

}  // namespace cablecal
