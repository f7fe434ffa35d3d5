#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "cablecal/kinematics.hpp"
#include "cablecal/rng.hpp"

namespace cablecal {

/// Error-process parameters of the simulated cable-driven arm. Arrays are
/// indexed by joint (0..5); only the wrist entries (3..5) of the backlash
/// and stretch arrays have an effect.
struct PlantConfig {
  std::array<double, 6> backlash_width{};
  std::array<double, 6> stretch_gain{};
  double coupling_56 = 0.0;
  double coupling_45 = 0.0;
  std::array<double, 6> noise_sd{};
  /// Constant offset added to every output joint. Zero in both presets.
  std::array<double, 6> bias{};
  std::uint64_t seed = 0;

  static PlantConfig identity();
  static PlantConfig standard();

  void validate() const;
  /// Stable hex digest of every field, used to tag datasets and reports.
  std::string hash() const;
};

/// Classical play operator.
double backlash(double u, double y_prev, double width);

struct PlantState {
  JointConfig last_output{Vec6::Zero(), Role::physical};
  /// Noise-free joint positions; the play operators act on these.
  Vec6 mechanism = Vec6::Zero();
  std::uint64_t step_count = 0;
  Rng rng{0};
};

/// Quasi-static stepping: each command is held until the arm comes to rest,
/// then the realized configuration is returned.
class Plant {
 public:
  Plant(PlantConfig cfg, KinematicParams params);

  const PlantConfig& config() const { return cfg_; }
  const KinematicParams& params() const { return params_; }
  const PlantState& state() const { return state_; }

  void reset(const JointConfig& q0);
  JointConfig step(const JointConfig& q_c);

 private:
  PlantConfig cfg_;
  KinematicParams params_;
  PlantState state_;
};

}  // namespace cablecal
