#include "pkatlas/fixtures.hpp"

#include <algorithm>
#include <random>

#include <json.hpp>

#include "pkatlas/error.hpp"

namespace pkatlas {

namespace {

// Fisher-Yates with plain modulo so the order is the same on every
// standard library.
std::vector<std::size_t> shuffled(std::vector<std::size_t> v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng() % i]);
  }
  return v;
}

std::vector<std::size_t> six_count_leaves(const JointAtlas& joint) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < joint.leaves.size(); ++i) {
    const JointLeaf& l = joint.leaves[i];
    if (l.dk_count == 6 && !l.singular_image && l.joint_region >= 0 &&
        !joint.regions[l.joint_region].artifact) {
      out.push_back(i);
    }
  }
  return out;
}

}  // namespace

std::vector<std::pair<int, int>> Fixture::same_aspect_pairs() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < static_cast<int>(poses.size()); ++i) {
    for (int j = i + 1; j < static_cast<int>(poses.size()); ++j) {
      if (poses[i].aspect == poses[j].aspect) out.emplace_back(i, j);
    }
  }
  return out;
}

std::vector<std::pair<int, int>> Fixture::cross_aspect_pairs() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < static_cast<int>(poses.size()); ++i) {
    for (int j = i + 1; j < static_cast<int>(poses.size()); ++j) {
      if (poses[i].aspect != poses[j].aspect) out.emplace_back(i, j);
    }
  }
  return out;
}

Fixture find_fixture(const WorkspaceAtlas& atlas, const JointAtlas& joint,
                     std::uint64_t seed, const DKOptions& dk) {
  const DirectKinematicsSolver solver(atlas.geometry, dk);
  const int majors = atlas.major_aspect_count();
  Fixture out;
  out.seed = seed;
  for (std::size_t leaf : shuffled(six_count_leaves(joint), seed)) {
    ++out.candidates_tried;
    const JointVector q = joint.tree.cell(leaf).center;
    const int region = joint.leaves[leaf].joint_region;
    DKSolutionSet set;
    try {
      set = solver.solve(q);
    } catch (const SolverDegeneracy&) {
      continue;
    }
    if (set.size() != 6) continue;
    std::vector<FixturePose> poses;
    int per_aspect[2] = {0, 0};
    for (const Pose& p : set.poses) {
      const Location loc = locate(atlas, p);
      if (!loc.reachable || loc.boundary || loc.singular || loc.char_surface) break;
      if (!loc.aspect || *loc.aspect >= majors || *loc.aspect > 1) break;
      if (!loc.basic_region || atlas.basic_regions[*loc.basic_region].artifact) break;
      // The pose's region must map onto the joint region holding q.
      if (atlas.basic_regions[*loc.basic_region].joint_region != region) break;
      if (!loc.domain) break;
      ++per_aspect[*loc.aspect];
      poses.push_back({p, det_A(atlas.geometry, p), *loc.aspect, *loc.basic_region,
                       *loc.domain});
    }
    if (poses.size() != 6 || per_aspect[0] != 3 || per_aspect[1] != 3) continue;
    std::stable_sort(poses.begin(), poses.end(),
                     [](const auto& a, const auto& b) { return a.aspect < b.aspect; });
    out.q = q;
    out.poses = std::move(poses);
    return out;
  }
  throw NotFound("no joint vector with six labeled assembly modes, three per aspect, at "
                 "this depth");
}

std::vector<JointVector> six_solution_samples(const JointAtlas& joint, std::size_t n,
                                              std::uint64_t seed, const DKOptions& dk) {
  const std::vector<std::size_t> leaves = six_count_leaves(joint);
  if (leaves.empty()) throw NotFound("joint atlas has no count-6 leaves");
  const DirectKinematicsSolver solver(joint.geometry, dk);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<JointVector> out;
  for (std::size_t attempt = 0; out.size() < n && attempt < 100 * n; ++attempt) {
    const Cell c = joint.tree.cell(leaves[rng() % leaves.size()]);
    JointVector q;
    for (int k = 0; k < 3; ++k) q[k] = c.center[k] + unit(rng) * c.half_extent[k];
    try {
      if (solver.solve(q).size() == 6) out.push_back(q);
    } catch (const SolverDegeneracy&) {
    }
  }
  return out;
}

std::string fixture_to_json(const Fixture& f) {
  nlohmann::ordered_json j;
  j["format"] = "pkatlas-fixture v1";
  j["seed"] = f.seed;
  j["candidates_tried"] = f.candidates_tried;
  j["q"] = {f.q[0], f.q[1], f.q[2]};
  j["poses"] = nlohmann::ordered_json::array();
  for (const FixturePose& p : f.poses) {
    nlohmann::ordered_json e;
    e["pose"] = {p.pose.x, p.pose.y, p.pose.phi};
    e["det"] = p.det;
    e["aspect"] = p.aspect;
    e["basic_region"] = p.basic_region;
    e["domain"] = p.domain;
    j["poses"].push_back(e);
  }
  return j.dump(2) + "\n";
}

}  // namespace pkatlas
