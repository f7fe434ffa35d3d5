#include "cablecal/error.hpp"
#include "cablecal/types.hpp"

namespace cablecal {

std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::degenerate_extension: return "degenerate extension";
    case Errc::singular_direction: return "singular direction";
    case Errc::gimbal_degenerate: return "gimbal degenerate";
    case Errc::limit_violation: return "limit violation";
    case Errc::too_few_points: return "too few points";
    case Errc::rank_deficiency: return "rank deficiency";
    case Errc::no_spheres_found: return "no spheres found";
    case Errc::coincident_centers: return "coincident centers";
    case Errc::collinear_centers: return "collinear centers";
    case Errc::unknown_identity: return "unknown identity";
    case Errc::workspace_unreachable: return "workspace outside reachable set";
    case Errc::history_too_long: return "history too long";
    case Errc::format_violation: return "format violation";
    case Errc::degenerate_geometry: return "degenerate geometry";
    case Errc::non_convergence: return "non-convergence";
    case Errc::divergence: return "divergence";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::direction_mismatch: return "direction mismatch";
    case Errc::untrained_model: return "untrained model";
    case Errc::io: return "i/o";
    case Errc::parse: return "parse";
  }
  return "unknown";
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::commanded: return "commanded";
    case Role::physical: return "physical";
    case Role::desired: return "desired";
    case Role::estimated: return "estimated";
  }
  return "unknown";
}

}  // namespace cablecal
