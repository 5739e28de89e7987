#ifndef PKATLAS_CONFIG_HPP
#define PKATLAS_CONFIG_HPP

// Geometry files are JSON objects:
//
//   { "base": [[x, y], [x, y], [x, y]],
//     "platform_edges": [l12, l23, l31],      or "platform_local": 3 x [x, y]
//     "rho_min": 10.0, "rho_max": 32.0 }

#include <string>

#include "pkatlas/kinematics.hpp"

namespace pkatlas {

/// Throws ConfigError on malformed input and on invalid geometry.
ManipulatorGeometry parse_geometry(const std::string& text);

/// Throws IoError if the file cannot be read.
ManipulatorGeometry load_geometry(const std::string& path);

/// Canonical form with platform_local; parse_geometry reads it back exactly.
std::string geometry_to_json(const ManipulatorGeometry& g);

}  // namespace pkatlas

#endif  // PKATLAS_CONFIG_HPP
