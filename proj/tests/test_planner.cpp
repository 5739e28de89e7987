#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "pkatlas/error.hpp"
#include "pkatlas/planner.hpp"
#include "shared.hpp"

using namespace pkatlas;

namespace {

const WorkspaceAtlas& ws() { return shared::depth6().workspace; }

// A second pose in the same basic region as `leaf`, a few leaves away.
std::optional<Pose> nearby_in_region(const WorkspaceAtlas& a, std::size_t leaf, int hops) {
  const int region = a.leaves[leaf].basic_region;
  std::size_t cur = leaf;
  for (int h = 0; h < hops; ++h) {
    bool moved = false;
    for (std::size_t nb : a.tree.neighbors(cur)) {
      if (nb > cur && a.leaves[nb].basic_region == region) {
        cur = nb;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (cur == leaf) return std::nullopt;
  return a.center_pose(cur);
}

// A synthetic atlas: every leaf of a uniform depth-4 pose box is an aspect-0
// leaf of domain 0.
WorkspaceAtlas open_atlas() {
  WorkspaceAtlas a;
  a.geometry = default_geometry();
  a.tree = RegionOctree::build(PeriodicBox::pose_space(0, 16, 0, 16), 4,
                               [](const Cell&) { return CellClass::kFull; }, {4, {}});
  a.leaves.resize(a.tree.leaf_count());
  for (WorkspaceLeaf& l : a.leaves) {
    l.reachable = true;
    l.component = 0;
    l.aspect = 0;
    l.basic_region = 0;
    l.domain = 0;
  }
  return a;
}

double path_cost(const WorkspaceAtlas& a, const std::vector<std::size_t>& path) {
  double c = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) c += center_distance(a, path[k], path[k + 1]);
  return c;
}

}  // namespace

TEST_CASE("plan class names") {
  CHECK(plan_class_name(PlanClass::kSameDomain) == "SAME_DOMAIN");
  CHECK(plan_class_name(PlanClass::kSameAspectDifferentDomain) == "SAME_ASPECT_DIFFERENT_DOMAIN");
  CHECK(plan_class_name(PlanClass::kDifferentAspects) == "DIFFERENT_ASPECTS");
  CHECK(plan_class_name(PlanClass::kUnreachableOrDisconnected) == "UNREACHABLE_OR_DISCONNECTED");
}

TEST_CASE("A* on an open grid") {
  const WorkspaceAtlas a = open_atlas();
  auto all = [](std::size_t) { return true; };
  const std::size_t s = *a.tree.find_leaf(Eigen::Vector3d(0.5, 0.5, 0.2));
  const auto self = astar(a, s, s, all);
  REQUIRE(self);
  CHECK(self->size() == 1);
  CHECK(path_cost(a, *self) == 0.0);

  // A corridor along x.
  const std::size_t g = *a.tree.find_leaf(Eigen::Vector3d(15.5, 2.5, 0.2));
  const auto path = astar(a, s, g, all);
  REQUIRE(path);
  CHECK(path->front() == s);
  CHECK(path->back() == g);
  for (std::size_t k = 0; k + 1 < path->size(); ++k) {
    const auto nb = a.tree.neighbors((*path)[k]);
    CHECK(std::binary_search(nb.begin(), nb.end(), (*path)[k + 1]));
  }
  const double direct = center_distance(a, s, g);
  CHECK(path_cost(a, *path) <= 1.5 * direct + 1e-12);
  const double best = oracle::dijkstra(
      a.tree.leaf_count(), s, g, [&](std::size_t u) { return a.tree.neighbors(u); }, all,
      [&](std::size_t u, std::size_t v) { return center_distance(a, u, v); });
  CHECK(path_cost(a, *path) == doctest::Approx(best).epsilon(1e-12));

  // A wall at x in [8, 9) splits the box.
  auto left_or_right = [&](std::size_t i) {
    const double x = a.tree.cell(i).center.x();
    return x < 8.0 || x > 9.0;
  };
  CHECK_FALSE(astar(a, s, g, left_or_right));
}

TEST_CASE("A* matches Dijkstra on the atlas") {
  const WorkspaceAtlas& a = ws();
  const Fixture& f = shared::fixture6();
  const std::size_t s = *a.tree.find_leaf(f.poses[0].pose.vector());
  const std::size_t g = *a.tree.find_leaf(f.poses[1].pose.vector());
  const int aspect = a.leaves[s].aspect;
  auto passable = [&](std::size_t i) { return a.leaves[i].aspect == aspect; };
  const auto path = astar(a, s, g, passable);
  REQUIRE(path);
  const double best = oracle::dijkstra(
      a.tree.leaf_count(), s, g, [&](std::size_t u) { return a.tree.neighbors(u); }, passable,
      [&](std::size_t u, std::size_t v) { return center_distance(a, u, v); });
  CHECK(path_cost(a, *path) == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("fixture") {
  const Fixture& f = shared::fixture6();
  REQUIRE(f.poses.size() == 6);
  int per_aspect[2] = {0, 0};
  for (const FixturePose& p : f.poses) {
    CHECK((inverse_kinematics(ws().geometry, p.pose) - f.q).cwiseAbs().maxCoeff() < 1e-9);
    ++per_aspect[p.aspect];
    CHECK((p.det < 0.0) == (ws().aspects[p.aspect].det_sign < 0));
    CHECK_FALSE(locate(ws(), p.pose).char_surface);
  }
  CHECK(per_aspect[0] == 3);
  CHECK(per_aspect[1] == 3);
  CHECK(f.same_aspect_pairs().size() == 6);
  CHECK(f.cross_aspect_pairs().size() == 9);
  const Fixture again = find_fixture(ws(), shared::depth6().joint, 1);
  CHECK(fixture_to_json(again) == fixture_to_json(f));
  CHECK_THROWS_AS(find_fixture(shared::depth4().workspace, shared::depth4().joint, 1), NotFound);
}

TEST_CASE("classify") {
  const Fixture& f = shared::fixture6();
  const Pose& a = f.poses[0].pose;
  CHECK(classify(ws(), a, a) == PlanClass::kSameDomain);
  for (auto [i, j] : f.same_aspect_pairs()) {
    CHECK(classify(ws(), f.poses[i].pose, f.poses[j].pose) == PlanClass::kSameAspectDifferentDomain);
    CHECK(classify(ws(), f.poses[j].pose, f.poses[i].pose) == PlanClass::kSameAspectDifferentDomain);
  }
  for (auto [i, j] : f.cross_aspect_pairs()) {
    CHECK(classify(ws(), f.poses[i].pose, f.poses[j].pose) == PlanClass::kDifferentAspects);
    CHECK(classify(ws(), f.poses[j].pose, f.poses[i].pose) == PlanClass::kDifferentAspects);
  }
  CHECK(classify(ws(), a, Pose(45, 0, 0)) == PlanClass::kUnreachableOrDisconnected);
  CHECK(classify(ws(), Pose(500, 0, 0), a) == PlanClass::kUnreachableOrDisconnected);

  std::optional<std::size_t> singular;
  for (std::size_t i = 0; i < ws().leaves.size() && !singular; ++i) {
    if (ws().leaves[i].singular) singular = i;
  }
  REQUIRE(singular);
  CHECK_THROWS_AS(classify(ws(), a, ws().center_pose(*singular)), BoundaryAmbiguity);
}

TEST_CASE("same-domain plan") {
  const Fixture& f = shared::fixture6();
  const std::size_t leaf = *ws().tree.find_leaf(f.poses[0].pose.vector());
  const auto goal = nearby_in_region(ws(), leaf, 4);
  REQUIRE(goal);
  const Pose& start = f.poses[0].pose;
  const PlanResult r = plan_same_domain(ws(), start, *goal);
  CHECK(r.plan_class == PlanClass::kSameDomain);
  CHECK(r.crossings.empty());
  CHECK(r.reached);
  CHECK(r.goal_error < 1e-6);
  REQUIRE(r.workspace_path.size() == r.joint_trajectory.size());
  for (std::size_t i = 0; i < r.workspace_path.size(); ++i) {
    CHECK(r.joint_trajectory[i] == inverse_kinematics(ws().geometry, r.workspace_path[i]));
    CHECK(within_limits(ws().geometry, r.joint_trajectory[i]));
  }
  CHECK_THROWS_AS(plan_same_domain(ws(), f.poses[0].pose, f.poses[1].pose), Error);
}

TEST_CASE("non-singular assembly-mode change") {
  const Fixture& f = shared::fixture6();
  const PoseMetric m = PoseMetric::for_geometry(ws().geometry);
  for (auto [i, j] : f.same_aspect_pairs()) {
    CAPTURE(i);
    CAPTURE(j);
    const Pose& s = f.poses[i].pose;
    const Pose& g = f.poses[j].pose;
    const PlanResult r = plan_nonsingular_mode_change(ws(), s, g);
    CHECK(r.characteristic_crossings() >= 2);
    CHECK(r.singular_crossings() == 0);
    CHECK(r.reached);
    for (std::size_t leaf : r.leaf_path) CHECK_FALSE(ws().leaves[leaf].singular);
    for (const Crossing& c : r.crossings) {
      CHECK(m.distance(c.pose, r.workspace_path[c.index]) == 0.0);
    }
    const NaiveResult naive = naive_joint_interpolation(ws().geometry, s, g, r.step);
    CHECK(naive.goal_error > 10.0 * 1e-6);
  }
}

TEST_CASE("singular assembly-mode change") {
  const Fixture& f = shared::fixture6();
  for (auto [i, j] : f.cross_aspect_pairs()) {
    CAPTURE(i);
    CAPTURE(j);
    const PlanResult r = plan_singular_crossing(ws(), f.poses[i].pose, f.poses[j].pose);
    REQUIRE(r.singular_crossings() == 1);
    for (const Crossing& c : r.crossings) {
      if (c.kind == Crossing::Kind::kSingular) CHECK(std::abs(c.det) < 1e-6);
    }
    CHECK(r.reached);
    REQUIRE(r.reflect_back);
    CHECK(r.reflect_back->detected);
    CHECK(r.reflect_back->quadratic_ratio == doctest::Approx(4.0).epsilon(0.25));
  }
}

TEST_CASE("step halving leaves the tracked end pose unchanged") {
  const Fixture& f = shared::fixture6();
  const PoseMetric m = PoseMetric::for_geometry(ws().geometry);
  PlannerOptions coarse;
  coarse.step = default_step(ws());
  PlannerOptions fine = coarse;
  fine.step *= 0.5;
  const PlanResult a = plan(ws(), f.poses[0].pose, f.poses[2].pose, coarse);
  const PlanResult b = plan(ws(), f.poses[0].pose, f.poses[2].pose, fine);
  CHECK(m.distance(a.tracked.back(), b.tracked.back()) < 1e-6);
}

TEST_CASE("assembly-mode tracking") {
  const ManipulatorGeometry g = default_geometry();
  const Pose p(12, 8, 0.3);
  const JointVector q = inverse_kinematics(g, p);
  const std::vector<JointVector> still(5, q);
  const std::vector<Pose> poses = track_assembly_mode(g, still, p, 0.1);
  REQUIRE(poses.size() == 5);
  const PoseMetric m = PoseMetric::for_geometry(g);
  for (const Pose& t : poses) CHECK(m.distance(t, p) < 1e-9);

  CHECK_THROWS_AS(track_assembly_mode(g, still, p, 1e3), TrackingAmbiguity);
  CHECK_THROWS_AS(track_assembly_mode(g, {q, JointVector(1000, 10, 10)}, p, 0.1), TrackingLost);
  CHECK_THROWS_AS(track_assembly_mode(g, still, Pose(0, 0, 0), 0.1), TrackingLost);
}

TEST_CASE("trajectory export") {
  const Fixture& f = shared::fixture6();
  const PlanResult r = plan(ws(), f.poses[0].pose, f.poses[3].pose);
  const auto path = std::filesystem::temp_directory_path() / "pkatlas_test_trajectory.txt";
  write_trajectory(ws().geometry, r, path.string());
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# pkatlas-trajectory v1");
  std::size_t rows = 0, singular = 0, characteristic = 0;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      if (line.rfind("# class ", 0) == 0) CHECK(line == "# class DIFFERENT_ASPECTS");
      continue;
    }
    std::istringstream row(line);
    std::size_t index;
    double v[7];  // x y phi rho1 rho2 rho3 detA
    char flag;
    row >> index;
    for (double& x : v) row >> x;
    row >> flag;
    REQUIRE(row);
    CHECK(index == rows);
    singular += flag == 'S';
    characteristic += flag == 'C';
    ++rows;
  }
  CHECK(rows == r.workspace_path.size());
  CHECK(singular == 1);
  CHECK(static_cast<int>(characteristic) == r.characteristic_crossings());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(write_trajectory(ws().geometry, r, "/nonexistent/dir/t.txt"), IoError);
}
