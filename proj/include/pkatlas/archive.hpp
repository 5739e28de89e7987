#ifndef PKATLAS_ARCHIVE_HPP
#define PKATLAS_ARCHIVE_HPP

// An atlas archive is a directory holding
//
//   geometry.json      the geometry, canonical form
//   workspace.voxels   workspace leaves with their labels
//   joint.voxels       joint-space leaves with counts and regions
//   atlas-summary      JSON report: depths, counts, volumes, association
//
// Every file is a deterministic function of the analysis.

#include <string>

#include "pkatlas/atlas.hpp"

namespace pkatlas {

/// Depths below this give counts that are not meant to be trusted.
inline constexpr int kReliableDepth = 6;

std::string summary_json(const Analysis& analysis);

/// Creates the directory if needed. Throws IoError.
void write_archive(const Analysis& analysis, const std::string& dir);

/// Restores labels, component tables and the association table. Probe
/// extremes are not stored, so the result supports queries and planning but
/// not a rerun of the labeling passes. Throws IoError or ConfigError.
Analysis read_archive(const std::string& dir);

}  // namespace pkatlas

#endif  // PKATLAS_ARCHIVE_HPP
