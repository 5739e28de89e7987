#ifndef PKATLAS_FIXTURES_HPP
#define PKATLAS_FIXTURES_HPP

// Seeded search for joint vectors with six assembly modes, used to build
// planner queries with known answers.

#include <cstdint>
#include <string>
#include <vector>

#include "pkatlas/atlas.hpp"

namespace pkatlas {

struct FixturePose {
  Pose pose;
  double det = 0.0;
  int aspect = -1;
  int basic_region = -1;
  int domain = -1;
};

struct Fixture {
  std::uint64_t seed = 0;
  JointVector q = JointVector::Zero();
  std::vector<FixturePose> poses;  // sorted by aspect, then phi
  int candidates_tried = 0;

  /// Index pairs (i < j) of poses sharing an aspect.
  std::vector<std::pair<int, int>> same_aspect_pairs() const;
  /// Index pairs (i < j) of poses in different aspects.
  std::vector<std::pair<int, int>> cross_aspect_pairs() const;
};

/// Visits count-6 joint leaves in a seeded order and returns the first
/// leaf center whose six solutions all land in labeled leaves of the major
/// aspects, three per aspect, inside basic regions mapping onto the joint
/// region of the leaf. Throws NotFound when no candidate qualifies.
Fixture find_fixture(const WorkspaceAtlas& atlas, const JointAtlas& joint,
                     std::uint64_t seed, const DKOptions& dk = {});

/// Uniform samples from count-6 joint leaves off the singular image,
/// kept only when direct kinematics returns exactly six poses.
std::vector<JointVector> six_solution_samples(const JointAtlas& joint, std::size_t n,
                                              std::uint64_t seed,
                                              const DKOptions& dk = {});

std::string fixture_to_json(const Fixture& f);

}  // namespace pkatlas

#endif  // PKATLAS_FIXTURES_HPP
