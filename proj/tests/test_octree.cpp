#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "pkatlas/error.hpp"
#include "pkatlas/octree.hpp"

using namespace pkatlas;

namespace {

PeriodicBox unit_box() { return PeriodicBox{}; }

// FULL/EMPTY/MIXED for the union of balls, decided on the cell's box.
struct Balls {
  std::vector<std::pair<Eigen::Vector3d, double>> balls;
  std::array<bool, 3> wrap{false, false, false};

  CellClass operator()(const Cell& c) const {
    bool any_inside = false, all_outside = true;
    for (const auto& [center, r] : balls) {
      Eigen::Vector3d d = (c.center - center).cwiseAbs();
      for (int a = 0; a < 3; ++a) {
        if (wrap[a]) d[a] = std::min(d[a], 1.0 - d[a]);
      }
      const double nearest = (d - c.half_extent).cwiseMax(0.0).norm();
      const double farthest = (d + c.half_extent).norm();
      if (farthest <= r) any_inside = true;
      if (nearest < r) all_outside = false;
    }
    if (any_inside) return CellClass::kFull;
    return all_outside ? CellClass::kEmpty : CellClass::kMixed;
  }
};

RegionLabeling full_components(const RegionOctree& t) {
  return connected_components(t, [&](std::size_t i) { return t.cell_class(i) == CellClass::kFull; });
}

double total_volume(const RegionOctree& t) {
  double v = 0.0;
  for (std::size_t i = 0; i < t.leaf_count(); ++i) v += t.volume(i);
  return v;
}

}  // namespace

TEST_CASE("depth bounds") {
  auto all_mixed = [](const Cell&) { return CellClass::kMixed; };
  CHECK_THROWS_AS(RegionOctree::build(unit_box(), 0, all_mixed), DepthOutOfRange);
  CHECK_THROWS_AS(RegionOctree::build(unit_box(), kMaxOctreeDepth + 1, all_mixed),
                  DepthOutOfRange);
}

TEST_CASE("uniform trees and face neighbours") {
  auto all_mixed = [](const Cell&) { return CellClass::kMixed; };
  const RegionOctree d1 = RegionOctree::build(unit_box(), 1, all_mixed);
  REQUIRE(d1.leaf_count() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(d1.neighbors(i).size() == 3);

  PeriodicBox wrapped = unit_box();
  wrapped.periodic = {false, false, true};
  const RegionOctree d2 = RegionOctree::build(wrapped, 2, all_mixed);
  REQUIRE(d2.leaf_count() == 64);
  const std::size_t inner = *d2.find_leaf(Eigen::Vector3d(0.4, 0.6, 0.1));
  CHECK(d2.neighbors(inner).size() == 6);

  const RegionOctree d3 = RegionOctree::build(unit_box(), 3, all_mixed);
  const std::size_t mid = *d3.find_leaf(Eigen::Vector3d(0.4, 0.4, 0.4));
  CHECK(d3.neighbors(mid).size() == 6);
  const std::size_t corner = *d3.find_leaf(Eigen::Vector3d(0.01, 0.01, 0.01));
  CHECK(d3.neighbors(corner).size() == 3);
}

TEST_CASE("leaves partition the box and adjacency is symmetric") {
  Balls shape{{{Eigen::Vector3d(0.3, 0.4, 0.5), 0.22}, {Eigen::Vector3d(0.7, 0.6, 0.2), 0.17}}};
  PeriodicBox box;
  box.lo = Eigen::Vector3d(-3, 2, 0);
  box.hi = Eigen::Vector3d(5, 4.5, 2.0 * std::numbers::pi);
  box.periodic = {false, false, true};
  // Map the unit-box balls into this box.
  auto scaled = [&](const Cell& c) {
    Cell u = c;
    u.center = (c.center - box.lo).cwiseQuotient(box.extent());
    u.half_extent = c.half_extent.cwiseQuotient(box.extent());
    return shape(u);
  };
  for (int depth : {3, 5, 6}) {
    const RegionOctree t = RegionOctree::build(box, depth, scaled);
    CHECK(std::abs(total_volume(t) - box.volume()) <= 1e-12 * box.volume());
    for (std::size_t a = 0; a < t.leaf_count(); ++a) {
      const Cell ca = t.cell(a);
      CHECK(ca.depth <= depth);
      for (std::size_t b : t.neighbors(a)) {
        const auto back = t.neighbors(b);
        CHECK(std::binary_search(back.begin(), back.end(), a));
        CHECK(b != a);
      }
      CHECK(*t.find_leaf(ca.center) == a);
    }
  }
}

TEST_CASE("components match a dense-grid flood fill") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 12; ++trial) {
    const int depth = 3 + trial % 3;
    Balls shape;
    shape.wrap = {false, trial % 2 == 0, trial % 2 == 0};
    for (int b = 0; b < 6; ++b) {
      shape.balls.push_back({Eigen::Vector3d(unit(rng), unit(rng), unit(rng)),
                             0.06 + 0.15 * unit(rng)});
    }
    PeriodicBox box = unit_box();
    box.periodic = shape.wrap;
    const RegionOctree t = RegionOctree::build(box, depth, shape);
    const RegionLabeling lab = full_components(t);

    std::vector<int> full(t.leaf_count());
    for (std::size_t i = 0; i < t.leaf_count(); ++i) {
      full[i] = t.cell_class(i) == CellClass::kFull ? 1 : -1;
    }
    const std::vector<int> dense_full = oracle::rasterize(t, full);
    std::vector<char> on(dense_full.size());
    for (std::size_t i = 0; i < on.size(); ++i) on[i] = dense_full[i] > 0;
    int count = 0;
    const std::vector<int> dense = oracle::flood_fill(on, 1 << depth, shape.wrap, &count);
    CAPTURE(trial);
    CHECK(lab.component_count == count);
    CHECK(oracle::same_partition(oracle::rasterize(t, lab.label), dense));
  }
}

TEST_CASE("components across the periodic seam merge") {
  auto seam_band = [](const Cell& c) {
    const double lo = c.center[2] - c.half_extent[2], hi = c.center[2] + c.half_extent[2];
    const bool inside = hi <= 0.125 || lo >= 0.875;
    const bool outside = lo >= 0.125 && hi <= 0.875;
    return inside ? CellClass::kFull : outside ? CellClass::kEmpty : CellClass::kMixed;
  };
  PeriodicBox box = unit_box();
  const RegionOctree open = RegionOctree::build(box, 5, seam_band);
  CHECK(full_components(open).component_count == 2);
  box.periodic = {false, false, true};
  const RegionOctree torus = RegionOctree::build(box, 5, seam_band);
  const RegionLabeling lab = full_components(torus);
  CHECK(lab.component_count == 1);
  CHECK(lab.measure(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(*torus.find_leaf(Eigen::Vector3d(0.5, 0.5, 1.05)) ==
        *torus.find_leaf(Eigen::Vector3d(0.5, 0.5, 0.05)));
  CHECK_FALSE(open.find_leaf(Eigen::Vector3d(0.5, 0.5, 1.05)));
}

TEST_CASE("two blobs give two components with their volumes") {
  auto blocks = [](const Cell& c) {
    auto in_block = [&](const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
      if ((c.lo().array() >= lo.array()).all() && (c.hi().array() <= hi.array()).all()) return 1;
      if ((c.hi().array() <= lo.array()).any() || (c.lo().array() >= hi.array()).any()) return -1;
      return 0;
    };
    const int a = in_block(Eigen::Vector3d(0.125, 0.125, 0.125), Eigen::Vector3d(0.375, 0.5, 0.25));
    const int b = in_block(Eigen::Vector3d(0.625, 0.5, 0.5), Eigen::Vector3d(0.875, 0.875, 1.0));
    if (a == 1 || b == 1) return CellClass::kFull;
    if (a == -1 && b == -1) return CellClass::kEmpty;
    return CellClass::kMixed;
  };
  const RegionOctree t = RegionOctree::build(unit_box(), 4, blocks);
  const RegionLabeling lab = full_components(t);
  REQUIRE(lab.component_count == 2);
  std::vector<double> v{lab.measure(0), lab.measure(1)};
  std::sort(v.begin(), v.end());
  CHECK(v[0] == doctest::Approx(0.25 * 0.375 * 0.125).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.25 * 0.375 * 0.5).epsilon(1e-12));
  CHECK_THROWS_AS(lab.measure(2), UnknownId);
  CHECK_THROWS_AS(lab.measure(-1), UnknownId);
}

TEST_CASE("half space at depth 8") {
  const Eigen::Vector3d n = Eigen::Vector3d(1, 2, -0.5).normalized();
  const Eigen::Vector3d mid(0.5, 0.5, 0.5);
  auto half = [&](const Cell& c) {
    const double s = n.dot(c.center - mid);
    const double reach = n.cwiseAbs().dot(c.half_extent);
    return s >= reach ? CellClass::kFull : s <= -reach ? CellClass::kEmpty : CellClass::kMixed;
  };
  const RegionOctree t = RegionOctree::build(unit_box(), 8, half);
  double full = 0.0, mixed = 0.0;
  for (std::size_t i = 0; i < t.leaf_count(); ++i) {
    if (t.cell_class(i) == CellClass::kFull) full += t.volume(i);
    if (t.cell_class(i) == CellClass::kMixed) mixed += t.volume(i);
  }
  CHECK(std::abs(full + 0.5 * mixed - 0.5) < 0.005);
}

TEST_CASE("join predicate splits components") {
  auto all_full = [](const Cell&) { return CellClass::kFull; };
  PeriodicBox box = unit_box();
  box.periodic = {true, false, false};
  const RegionOctree t = RegionOctree::build(box, 3, all_full, {3, {}});
  REQUIRE(t.leaf_count() == 512);
  auto left = [&](std::size_t i) { return t.cell(i).center.x() < 0.5; };
  const RegionLabeling lab = connected_components(
      t, [](std::size_t) { return true; }, [&](std::size_t a, std::size_t b) { return left(a) == left(b); });
  // Without the join the periodic x axis would close the ring into one.
  CHECK(lab.component_count == 2);
  CHECK(connected_components(t, [](std::size_t) { return true; }).component_count == 1);
}

TEST_CASE("voxel export round trip") {
  Balls shape{{{Eigen::Vector3d(0.4, 0.5, 0.5), 0.3}}};
  PeriodicBox box = unit_box();
  box.periodic = {false, false, true};
  const RegionOctree t = RegionOctree::build(box, 5, shape);
  const auto path = std::filesystem::temp_directory_path() / "pkatlas_test_roundtrip.voxels";
  export_voxels(t, [&](std::size_t i) {
    return Attributes{{"id", static_cast<double>(i)}, {"v", 1.0 / (1.0 + i)}};
  }, path.string());
  const VoxelImport back = import_voxels(path.string(), box, 5);
  REQUIRE(back.tree.leaf_count() == t.leaf_count());
  for (std::size_t i = 0; i < t.leaf_count(); ++i) {
    CHECK(back.tree.cell(i).index == t.cell(i).index);
    CHECK(back.tree.depth(i) == t.depth(i));
    CHECK(back.tree.cell_class(i) == t.cell_class(i));
    REQUIRE(back.attributes[i].size() == 2);
    CHECK(back.attributes[i][0].second == static_cast<double>(i));
    CHECK(back.attributes[i][1].second == doctest::Approx(1.0 / (1.0 + i)).epsilon(1e-8));
  }
  const auto again = std::filesystem::temp_directory_path() / "pkatlas_test_roundtrip2.voxels";
  export_voxels(back.tree, [&](std::size_t i) { return back.attributes[i]; }, again.string());
  std::ifstream a(path), b(again);
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  std::filesystem::remove(path);
  std::filesystem::remove(again);
  CHECK_THROWS_AS(import_voxels("/nonexistent/file.voxels", box, 5), IoError);
}
