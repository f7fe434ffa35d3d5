#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cablecal {

enum class Errc {
  invalid_argument,
  degenerate_extension,
  singular_direction,
  gimbal_degenerate,
  limit_violation,
  too_few_points,
  rank_deficiency,
  no_spheres_found,
  coincident_centers,
  collinear_centers,
  unknown_identity,
  workspace_unreachable,
  history_too_long,
  format_violation,
  degenerate_geometry,
  non_convergence,
  divergence,
  shape_mismatch,
  direction_mismatch,
  untrained_model,
  io,
  parse,
};

std::string_view to_string(Errc e);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cablecal
