#ifndef PKATLAS_PLANNER_HPP
#define PKATLAS_PLANNER_HPP

// Trajectory queries against a labeled workspace atlas.
//
// A query is classified by the labels of its end poses, a leaf path is found
// by A*, and the path is turned into densely sampled poses and joint vectors.
// Characteristic and singular crossings along the samples are located by
// bisection and inserted as exact samples. Continuation (nearest-solution
// tracking of the direct kinematics along the joint trajectory) then checks
// which assembly mode the joint trajectory actually realizes.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pkatlas/atlas.hpp"

namespace pkatlas {

enum class PlanClass {
  kSameDomain,
  kSameAspectDifferentDomain,
  kDifferentAspects,
  kUnreachableOrDisconnected,
};

/// SAME_DOMAIN, SAME_ASPECT_DIFFERENT_DOMAIN, DIFFERENT_ASPECTS or
/// UNREACHABLE_OR_DISCONNECTED.
std::string_view plan_class_name(PlanClass c);

struct Crossing {
  enum class Kind { kCharacteristic, kSingular };
  Kind kind = Kind::kCharacteristic;
  Pose pose;
  std::size_t index = 0;  // sample index in the workspace path
  double det = 0.0;       // det(A) at the crossing pose
};

/// Local signature of a singular crossing. With w the left null vector of A
/// at the crossing and s the arc parameter along the path, the normal
/// component n(s) = w . (q(s) - q*) stays on one side and grows like s^2,
/// while its rate dn/ds changes sign: the joint path touches the boundary of
/// the singular image and turns back.
struct ReflectBack {
  double h = 0.0;
  double normal_before = 0.0;  // n(-h)
  double normal_after = 0.0;   // n(+h)
  double quadratic_ratio = 0.0;  // n(h) / n(h / 2), 4 for a clean s^2
  double rate_before = 0.0;
  double rate_after = 0.0;
  bool detected = false;
};

struct PlanResult {
  PlanClass plan_class = PlanClass::kUnreachableOrDisconnected;
  Pose start;
  Pose goal;
  std::vector<std::size_t> leaf_path;
  std::vector<Pose> workspace_path;
  std::vector<JointVector> joint_trajectory;  // IK of workspace_path
  std::vector<Crossing> crossings;
  /// Continuation along joint_trajectory; samples too close to a singular
  /// crossing to be tracked hold the path pose.
  std::vector<Pose> tracked;
  double step = 0.0;
  double goal_error = 0.0;  // PoseMetric distance of the tracked end to goal
  bool reached = false;
  std::optional<ReflectBack> reflect_back;
  std::vector<std::string> notes;

  int characteristic_crossings() const;
  int singular_crossings() const;
};

struct PlannerOptions {
  double singular_cost = 100.0;  // cost multiplier for singular leaves
  double step = 0.0;             // 0: half the diagonal of a deepest leaf
  int max_refinements = 4;       // step halvings after a tracking ambiguity
  double goal_tolerance = 1e-6;
  double crossing_det_tolerance = 1e-6;
  DKOptions dk;
};

/// Throws BoundaryAmbiguity when an end pose lies in a limit-boundary,
/// singular or characteristic leaf. Poses outside the box are unreachable.
PlanClass classify(const WorkspaceAtlas& atlas, const Pose& start, const Pose& goal);

using LeafFilter = std::function<bool(std::size_t)>;
using EdgeCost = std::function<double(std::size_t, std::size_t)>;

/// Pose-metric distance between leaf centers.
double center_distance(const WorkspaceAtlas& atlas, std::size_t a, std::size_t b);

/// Minimal-cost face-adjacent leaf path. The heuristic is the center
/// distance to the goal, admissible whenever cost(a, b) >= center_distance.
/// The default cost is center_distance.
std::optional<std::vector<std::size_t>> astar(const WorkspaceAtlas& atlas,
                                              std::size_t start, std::size_t goal,
                                              const LeafFilter& passable,
                                              const EdgeCost& cost = {});

double default_step(const WorkspaceAtlas& atlas);

PlanResult plan_same_domain(const WorkspaceAtlas& atlas, const Pose& start,
                            const Pose& goal, const PlannerOptions& options = {});
PlanResult plan_nonsingular_mode_change(const WorkspaceAtlas& atlas, const Pose& start,
                                        const Pose& goal,
                                        const PlannerOptions& options = {});
PlanResult plan_singular_crossing(const WorkspaceAtlas& atlas, const Pose& start,
                                  const Pose& goal, const PlannerOptions& options = {});

/// Classifies and dispatches. Unreachable queries return an empty plan.
PlanResult plan(const WorkspaceAtlas& atlas, const Pose& start, const Pose& goal,
                const PlannerOptions& options = {});

/// Nearest-solution continuation. Throws TrackingLost when a joint vector
/// has no solution or the nearest one jumps more than 4 steps, and
/// TrackingAmbiguity when two solutions lie within 2 steps of the previous
/// pose.
std::vector<Pose> track_assembly_mode(const ManipulatorGeometry& g,
                                      const std::vector<JointVector>& joints,
                                      const Pose& initial, double step,
                                      const DKOptions& options = {});

/// Straight joint-space interpolation from IK(start) to IK(goal), tracked
/// from start until it ends or the continuation fails.
struct NaiveResult {
  std::vector<JointVector> joint_trajectory;
  std::vector<Pose> tracked;
  bool completed = false;  // tracked to the last joint vector
  std::string stop_reason;
  double goal_error = 0.0;
};
NaiveResult naive_joint_interpolation(const ManipulatorGeometry& g, const Pose& start,
                                      const Pose& goal, double step,
                                      const PlannerOptions& options = {});

/// Text table: one row per sample with index, x, y, phi, rho1..3, det(A)
/// and a crossing flag (C, S or -); the header records the query.
void write_trajectory(const ManipulatorGeometry& g, const PlanResult& plan,
                      const std::string& path);

}  // namespace pkatlas

#endif  // PKATLAS_PLANNER_HPP
