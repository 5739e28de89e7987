#ifndef PKATLAS_ATLAS_HPP
#define PKATLAS_ATLAS_HPP

// Labeled decompositions of the workspace and the joint space.
//
// Workspace leaves carry, in refinement order: reachability, the singular
// flag (det(A) changes sign or vanishes in the leaf), an aspect id, the
// characteristic-surface flag, a basic-region id and a uniqueness-domain id.
// Measure-zero surfaces are kept as one-leaf-thick barrier layers at the
// maximal depth.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pkatlas/direct_kinematics.hpp"
#include "pkatlas/kinematics.hpp"
#include "pkatlas/octree.hpp"

namespace pkatlas {

struct AtlasOptions {
  /// Non-EMPTY cells shallower than max_depth - coarse_levels are split
  /// unconditionally so that sample-based refinement sees every surface.
  int coarse_levels = 2;
  /// Components below this fraction of the reference volume are artifacts.
  double volume_floor = 1e-3;
  /// Mismatching samples tolerated when mapping a basic region to its
  /// joint region.
  double image_mismatch_fraction = 0.01;
  /// Face contacts needed before two basic regions count as adjacent.
  int adjacency_contacts = 4;
  /// Two regions of one row are associated once this fraction of the
  /// smaller region's samples has a direct-kinematics solution in the other.
  double association_fraction = 0.1;
  DKOptions dk;
};

/// Extremes of the probes (8 corners and the center) of one leaf.
struct LeafProbes {
  float det_min = 0.0f;
  float det_max = 0.0f;
  float det_abs_min = 0.0f;
  std::int8_t count_min = -1;  // -1 when no probe was evaluated
  std::int8_t count_max = -1;
  std::int8_t count_center = -1;
  bool all_reachable = false;
};

struct WorkspaceLeaf {
  bool reachable = false;  // FULL leaf: every probe within joint limits
  bool boundary = false;   // MIXED leaf on the joint-limit surface
  bool singular = false;
  bool char_surface = false;
  int image_region = -1;  // joint region of IK(center)
  int component = -1;  // connected component of reachable leaves
  int aspect = -1;
  int basic_region = -1;
  int domain = -1;
};

struct ComponentInfo {
  int id = -1;
  int aspect = -1;  // owning aspect, where meaningful
  double volume = 0.0;
  bool artifact = false;  // below the volume floor
  int det_sign = 0;       // aspects only
  int joint_region = -1;  // basic regions only
  double image_mismatch = 0.0;  // basic regions: off-majority sample fraction
  int samples = 0;              // basic regions: image samples voted
  int dk_count = -1;      // joint regions only
};

struct WorkspaceAtlas {
  ManipulatorGeometry geometry;
  AtlasOptions options;
  RegionOctree tree;
  std::vector<WorkspaceLeaf> leaves;
  std::vector<LeafProbes> probes;  // empty for an imported atlas

  double reachable_volume = 0.0;
  std::vector<ComponentInfo> components;
  std::vector<ComponentInfo> aspects;  // majors first, by decreasing volume
  std::vector<ComponentInfo> basic_regions;
  std::vector<ComponentInfo> domains;
  int ambiguous_groupings = 0;  // aspects with more than one valid grouping

  int max_depth() const { return tree.max_depth(); }
  int major_aspect_count() const;
  int major_domain_count(int aspect) const;
  /// Builds a pose at a leaf center.
  Pose center_pose(std::size_t leaf) const;
};

struct JointLeaf {
  int dk_count = 0;
  bool singular_image = false;
  int joint_region = -1;
};

struct JointAtlas {
  ManipulatorGeometry geometry;
  AtlasOptions options;
  RegionOctree tree;
  std::vector<JointLeaf> leaves;
  std::vector<LeafProbes> probes;
  std::vector<ComponentInfo> regions;

  std::optional<std::size_t> leaf_at(const JointVector& q) const;
  int region_at(const JointVector& q) const;
};

struct AssociationRow {
  int aspect = -1;
  int joint_region = -1;
  std::vector<int> basic_regions;
  /// Largest set of pairwise associated members: the number of assembly
  /// modes this aspect offers over the joint region.
  int modes = 0;

  std::size_t multiplicity() const { return basic_regions.size(); }
};

struct AssociationTable {
  std::vector<AssociationRow> rows;
  /// Pairs (a < b) of basic regions of one aspect holding two direct
  /// kinematic solutions of a common joint vector, with witness counts.
  std::map<std::pair<int, int>, int> witnesses;
  std::set<std::pair<int, int>> associated_pairs;

  /// Row index holding a basic region, or -1.
  int row_of(int basic_region) const;
  bool associated(int a, int b) const;
};

/// Pose box containing every reachable pose: leg 1 alone keeps B1 within
/// rho_max of A1; the box is widened to all base points.
PeriodicBox pose_box(const ManipulatorGeometry& g);
PeriodicBox joint_box(const ManipulatorGeometry& g);

/// Reachability octree. Cells whose probes disagree on the sign of det(A)
/// or on the direct-kinematics count of their inverse image are refined to
/// max depth as well, so later labeling passes see every surface.
WorkspaceAtlas build_workspace(const ManipulatorGeometry& g, int depth,
                               const AtlasOptions& options = {});

void extract_singular_set(WorkspaceAtlas& atlas);

/// Probe inside a singular leaf with |det(A)| driven below tolerance by
/// bisection between probes of opposite sign.
std::optional<Pose> singular_probe(const WorkspaceAtlas& atlas,
                                   std::size_t leaf);

void compute_aspects(WorkspaceAtlas& atlas);

JointAtlas build_joint_atlas(const ManipulatorGeometry& g, int depth,
                             const AtlasOptions& options = {});

/// Flags aspect leaves whose center maps onto the singular image in joint
/// space; every other aspect leaf records the joint region of its image.
void characteristic_surfaces(WorkspaceAtlas& atlas, const JointAtlas& joint);

/// Components of non-characteristic aspect leaves sharing one image region.
/// Fragments below the volume floor are kept and marked as artifacts.
void basic_regions(WorkspaceAtlas& atlas);

/// Groups basic regions of each aspect by the joint region of their image.
/// Throws InconsistentImage if a region's samples disagree too often.
AssociationTable associate_regions(WorkspaceAtlas& atlas,
                                   const JointAtlas& joint);

void uniqueness_domains(WorkspaceAtlas& atlas, const AssociationTable& table);

struct Location {
  std::size_t leaf = 0;
  bool reachable = false;
  bool boundary = false;
  bool singular = false;
  bool char_surface = false;
  int image_region = -1;  // joint region of IK(center)
  int component = -1;
  std::optional<int> aspect;
  std::optional<int> basic_region;
  std::optional<int> domain;
};

/// Point query. phi is wrapped; throws OutOfBox outside the (x, y) range.
Location locate(const WorkspaceAtlas& atlas, const Pose& p);

/// Every stage above, in order.
struct Analysis {
  WorkspaceAtlas workspace;
  JointAtlas joint;
  AssociationTable table;
};
Analysis analyze(const ManipulatorGeometry& g, int workspace_depth,
                 int joint_depth, const AtlasOptions& options = {});

}  // namespace pkatlas

#endif  // PKATLAS_ATLAS_HPP
