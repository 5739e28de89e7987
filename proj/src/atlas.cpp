#include "pkatlas/atlas.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "pkatlas/error.hpp"

namespace pkatlas {

namespace {

constexpr std::int8_t kNotEvaluated = -2;

struct Sample {
  bool reachable = false;
  float det = 0.0f;
  std::int8_t count = kNotEvaluated;
};

// Probe values on a lattice twice as fine as the deepest cells, so that
// both corners and centers of every cell are lattice points and are shared
// between neighbouring cells.
class ProbeLattice {
 public:
  using Evaluate = std::function<Sample(const Eigen::Vector3d&)>;
  using Count = std::function<std::int8_t(const Eigen::Vector3d&)>;

  ProbeLattice(const PeriodicBox& box, int max_depth, Evaluate evaluate,
               Count count)
      : box_(box),
        level_(max_depth + 1),
        evaluate_(std::move(evaluate)),
        count_(std::move(count)) {
    samples_.reserve(1 << 20);
  }

  struct Probe {
    std::array<std::int64_t, 3> at;
  };

  // The 8 corners followed by the center of a cell.
  std::array<Probe, 9> probes(const Cell& cell) const {
    std::array<Probe, 9> out;
    const int shift = level_ - cell.depth;
    for (int c = 0; c < 8; ++c) {
      for (int a = 0; a < 3; ++a) {
        out[c].at[a] = static_cast<std::int64_t>(cell.index[a] + ((c >> a) & 1))
                       << shift;
      }
    }
    for (int a = 0; a < 3; ++a) {
      out[8].at[a] = static_cast<std::int64_t>(2 * cell.index[a] + 1) << (shift - 1);
    }
    return out;
  }

  const Sample& sample(const Probe& p, bool need_count) {
    const std::int64_t n = std::int64_t{1} << level_;
    std::array<std::int64_t, 3> at = p.at;
    for (int a = 0; a < 3; ++a) {
      if (box_.periodic[a]) at[a] = ((at[a] % n) + n) % n;
    }
    const std::uint64_t key =
        (static_cast<std::uint64_t>(at[0]) * static_cast<std::uint64_t>(n + 1) +
         static_cast<std::uint64_t>(at[1])) *
            static_cast<std::uint64_t>(n + 1) +
        static_cast<std::uint64_t>(at[2]);
    auto it = samples_.find(key);
    if (it == samples_.end()) {
      it = samples_.emplace(key, evaluate_(position(at))).first;
    }
    Sample& s = it->second;
    if (need_count && s.count == kNotEvaluated && s.reachable) {
      s.count = count_(position(at));
    }
    return s;
  }

  std::size_t size() const { return samples_.size(); }

 private:
  Eigen::Vector3d position(const std::array<std::int64_t, 3>& at) const {
    const double n = std::ldexp(1.0, level_);
    Eigen::Vector3d p;
    for (int a = 0; a < 3; ++a) {
      p[a] = box_.lo[a] + (static_cast<double>(at[a]) / n) * (box_.hi[a] - box_.lo[a]);
    }
    return p;
  }

  PeriodicBox box_;
  int level_;
  Evaluate evaluate_;
  Count count_;
  std::unordered_map<std::uint64_t, Sample> samples_;
};

LeafProbes summarize(ProbeLattice& lattice, const Cell& cell, bool need_count) {
  LeafProbes out;
  float det_min = std::numeric_limits<float>::infinity();
  float det_max = -std::numeric_limits<float>::infinity();
  float abs_min = std::numeric_limits<float>::infinity();
  int cmin = std::numeric_limits<int>::max();
  int cmax = std::numeric_limits<int>::min();
  bool all = true;
  bool any_count = false;
  const auto probes = lattice.probes(cell);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const Sample& s = lattice.sample(probes[i], need_count);
    if (!s.reachable) {
      all = false;
      continue;
    }
    det_min = std::min(det_min, s.det);
    det_max = std::max(det_max, s.det);
    abs_min = std::min(abs_min, std::abs(s.det));
    if (s.count >= 0) {
      any_count = true;
      cmin = std::min<int>(cmin, s.count);
      cmax = std::max<int>(cmax, s.count);
      if (i == 8) out.count_center = s.count;
    }
  }
  out.all_reachable = all;
  if (det_min <= det_max) {
    out.det_min = det_min;
    out.det_max = det_max;
    out.det_abs_min = abs_min;
  }
  if (any_count) {
    out.count_min = static_cast<std::int8_t>(cmin);
    out.count_max = static_cast<std::int8_t>(cmax);
  }
  return out;
}

bool sign_varies(const LeafProbes& p) {
  return p.det_min < 0.0f && p.det_max > 0.0f;
}

bool count_varies(const LeafProbes& p) { return p.count_min != p.count_max; }

Pose pose_at(const Eigen::Vector3d& v) { return Pose(v[0], v[1], v[2]); }

// Renumbers labeled components: majors (volume >= floor) by decreasing
// volume, then artifacts by decreasing volume. Returns the old -> new map.
std::vector<int> rank_components(const RegionLabeling& lab, double floor_volume,
                                 std::vector<ComponentInfo>* infos) {
  std::vector<int> order(static_cast<std::size_t>(lab.component_count));
  std::iota(order.begin(), order.end(), 0);
  auto is_major = [&](int id) {
    return lab.component_volume[static_cast<std::size_t>(id)] >= floor_volume;
  };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (is_major(a) != is_major(b)) return is_major(a);
    return lab.component_volume[static_cast<std::size_t>(a)] >
           lab.component_volume[static_cast<std::size_t>(b)];
  });
  std::vector<int> remap(order.size());
  infos->clear();
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    remap[static_cast<std::size_t>(order[rank])] = static_cast<int>(rank);
    ComponentInfo info;
    info.id = static_cast<int>(rank);
    info.volume = lab.component_volume[static_cast<std::size_t>(order[rank])];
    info.artifact = !is_major(order[rank]);
    infos->push_back(info);
  }
  return remap;
}

// Assigns regions (in the given order; the first `seeds` open one domain
// each) to domains so that every domain is connected in the adjacency graph
// and holds no associated pair. Fewest domains first; a region joins a
// domain only next to one of its earlier members.
struct Grouping {
  std::vector<int> domain;  // per position in the order
  int domains = 0;
  int solutions = 0;  // 1, or 2 when another grouping exists
};

Grouping group_regions(const std::vector<int>& order, std::size_t seeds,
                       const std::vector<std::vector<int>>& adjacent,
                       const AssociationTable& table) {
  const std::size_t n = order.size();
  auto is_adjacent = [&](int x, int y) {
    const auto& adj = adjacent[static_cast<std::size_t>(x)];
    return std::find(adj.begin(), adj.end(), y) != adj.end();
  };
  Grouping best;
  std::vector<int> assign(n, -1);
  for (std::size_t k = seeds; k <= n; ++k) {
    long budget = 2'000'000;
    int used = static_cast<int>(seeds);
    for (std::size_t i = 0; i < seeds; ++i) assign[i] = static_cast<int>(i);
    std::function<bool(std::size_t)> search = [&](std::size_t i) {
      if (--budget < 0) return true;
      if (i == n) {
        if (best.solutions++ == 0) {
          best.domain = assign;
          best.domains = used;
        }
        return best.solutions > 1;
      }
      const int r = order[i];
      for (int d = 0; d < used; ++d) {
        bool touches = false, clash = false;
        for (std::size_t j = 0; j < i && !clash; ++j) {
          if (assign[j] != d) continue;
          clash = table.associated(r, order[j]);
          touches = touches || is_adjacent(r, order[j]);
        }
        if (!touches || clash) continue;
        assign[i] = d;
        if (search(i + 1)) return true;
      }
      if (static_cast<std::size_t>(used) < k) {
        assign[i] = used++;
        const bool stop = search(i + 1);
        --used;
        if (stop) return true;
      }
      assign[i] = -1;
      return false;
    };
    search(seeds);
    if (best.solutions > 0) return best;
  }
  return best;
}

}  // namespace

PeriodicBox pose_box(const ManipulatorGeometry& g) {
  double x_hi = g.base[0].x(), y_hi = g.base[0].y();
  for (const auto& a : g.base) {
    x_hi = std::max(x_hi, a.x());
    y_hi = std::max(y_hi, a.y());
  }
  return PeriodicBox::pose_space(g.base[0].x() - g.rho_max, x_hi + g.rho_max,
                                 g.base[0].y() - g.rho_max, y_hi + g.rho_max);
}

PeriodicBox joint_box(const ManipulatorGeometry& g) {
  PeriodicBox box;
  box.lo = Eigen::Vector3d::Constant(g.rho_min);
  box.hi = Eigen::Vector3d::Constant(g.rho_max);
  box.periodic = {false, false, false};
  return box;
}

int WorkspaceAtlas::major_aspect_count() const {
  return static_cast<int>(std::count_if(aspects.begin(), aspects.end(),
                                        [](const auto& a) { return !a.artifact; }));
}

int WorkspaceAtlas::major_domain_count(int aspect) const {
  return static_cast<int>(std::count_if(domains.begin(), domains.end(), [&](const auto& d) {
    return !d.artifact && d.aspect == aspect;
  }));
}

Pose WorkspaceAtlas::center_pose(std::size_t leaf) const {
  return pose_at(tree.cell(leaf).center);
}

std::optional<std::size_t> JointAtlas::leaf_at(const JointVector& q) const {
  return tree.find_leaf(q);
}

int JointAtlas::region_at(const JointVector& q) const {
  const auto leaf = leaf_at(q);
  if (!leaf) return -1;
  return leaves[*leaf].joint_region;
}

int AssociationTable::row_of(int basic_region) const {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& br = rows[r].basic_regions;
    if (std::find(br.begin(), br.end(), basic_region) != br.end()) {
      return static_cast<int>(r);
    }
  }
  return -1;
}

bool AssociationTable::associated(int a, int b) const {
  return associated_pairs.count(std::minmax(a, b)) > 0;
}

WorkspaceAtlas build_workspace(const ManipulatorGeometry& g, int depth,
                               const AtlasOptions& options) {
  if (depth < 1 || depth > kMaxOctreeDepth) {
    throw DepthOutOfRange("workspace depth out of range");
  }
  WorkspaceAtlas atlas;
  atlas.geometry = g;
  atlas.options = options;
  const PeriodicBox box = pose_box(g);
  const DirectKinematicsSolver solver(g, options.dk);

  ProbeLattice lattice(
      box, depth,
      [&](const Eigen::Vector3d& v) {
        Sample s;
        const Pose p = pose_at(v);
        const JointVector q = inverse_kinematics(g, p);
        s.reachable = within_limits(g, q);
        if (s.reachable) s.det = static_cast<float>(det_A(g, p));
        return s;
      },
      [&](const Eigen::Vector3d& v) {
        return static_cast<std::int8_t>(
            solver.count(inverse_kinematics(g, pose_at(v))));
      });

  // Lipschitz margins of each leg length over a cell.
  std::array<double, 3> arm;
  for (int i = 0; i < 3; ++i) arm[i] = g.platform_local[i].norm();

  auto classify = [&](const Cell& cell) {
    const Pose center = pose_at(cell.center);
    const JointVector q = inverse_kinematics(g, center);
    const double planar = std::hypot(cell.half_extent[0], cell.half_extent[1]);
    bool certain_in = true;
    for (int i = 0; i < 3; ++i) {
      const double margin = planar + arm[i] * cell.half_extent[2];
      if (q[i] + margin < g.rho_min || q[i] - margin > g.rho_max) {
        return CellClass::kEmpty;
      }
      if (q[i] - margin < g.rho_min || q[i] + margin > g.rho_max) {
        certain_in = false;
      }
    }
    if (certain_in) return CellClass::kFull;
    if (cell.depth < depth) return CellClass::kMixed;
    int inside = 0;
    for (const auto& probe : lattice.probes(cell)) {
      if (lattice.sample(probe, false).reachable) ++inside;
    }
    if (inside == 9) return CellClass::kFull;
    if (inside == 0) return CellClass::kEmpty;
    return CellClass::kMixed;
  };

  RegionOctree::BuildOptions build;
  build.min_depth = std::max(0, depth - options.coarse_levels);
  build.refine = [&](const Cell& cell, CellClass cls) {
    if (cls != CellClass::kFull) return false;
    const LeafProbes p = summarize(lattice, cell, true);
    return sign_varies(p) || count_varies(p) ||
           p.det_abs_min < kSingularityTolerance;
  };
  atlas.tree = RegionOctree::build(box, depth, classify, build);

  const std::size_t n = atlas.tree.leaf_count();
  atlas.leaves.assign(n, WorkspaceLeaf{});
  atlas.probes.assign(n, LeafProbes{});
  for (std::size_t i = 0; i < n; ++i) {
    const CellClass cls = atlas.tree.cell_class(i);
    WorkspaceLeaf& leaf = atlas.leaves[i];
    leaf.reachable = cls == CellClass::kFull;
    leaf.boundary = cls == CellClass::kMixed;
    if (cls != CellClass::kEmpty) {
      atlas.probes[i] = summarize(lattice, atlas.tree.cell(i), leaf.reachable);
    }
    if (leaf.reachable) atlas.reachable_volume += atlas.tree.volume(i);
  }

  const RegionLabeling comps = connected_components(
      atlas.tree, [&](std::size_t i) { return atlas.leaves[i].reachable; });
  const std::vector<int> remap = rank_components(
      comps, options.volume_floor * atlas.reachable_volume, &atlas.components);
  for (std::size_t i = 0; i < n; ++i) {
    if (comps.label[i] >= 0) {
      atlas.leaves[i].component = remap[static_cast<std::size_t>(comps.label[i])];
    }
  }
  return atlas;
}

void extract_singular_set(WorkspaceAtlas& atlas) {
  for (std::size_t i = 0; i < atlas.leaves.size(); ++i) {
    WorkspaceLeaf& leaf = atlas.leaves[i];
    if (!leaf.reachable) continue;
    const LeafProbes& p = atlas.probes[i];
    leaf.singular = sign_varies(p) || p.det_abs_min < kSingularityTolerance;
  }
}

std::optional<Pose> singular_probe(const WorkspaceAtlas& atlas,
                                   std::size_t leaf) {
  const Cell cell = atlas.tree.cell(leaf);
  const ManipulatorGeometry& g = atlas.geometry;
  std::array<Eigen::Vector3d, 9> pts;
  for (int c = 0; c < 8; ++c) {
    for (int a = 0; a < 3; ++a) {
      pts[c][a] = ((c >> a) & 1) ? cell.hi()[a] : cell.lo()[a];
    }
  }
  pts[8] = cell.center;
  std::array<double, 9> det;
  for (int i = 0; i < 9; ++i) {
    det[i] = det_A(g, pose_at(pts[i]));
    if (std::abs(det[i]) < kSingularityTolerance) return pose_at(pts[i]);
  }
  for (int i = 0; i < 9; ++i) {
    for (int j = i + 1; j < 9; ++j) {
      if ((det[i] < 0) == (det[j] < 0)) continue;
      Eigen::Vector3d lo = pts[i], hi = pts[j];
      double det_lo = det[i];
      for (int it = 0; it < 200; ++it) {
        const Eigen::Vector3d mid = 0.5 * (lo + hi);
        const double d = det_A(g, pose_at(mid));
        if (std::abs(d) < kSingularityTolerance) return pose_at(mid);
        if ((d < 0) == (det_lo < 0)) {
          lo = mid;
          det_lo = d;
        } else {
          hi = mid;
        }
        if ((hi - lo).norm() < 1e-15) break;
      }
      return pose_at(0.5 * (lo + hi));
    }
  }
  return std::nullopt;
}

void compute_aspects(WorkspaceAtlas& atlas) {
  const RegionLabeling lab = connected_components(atlas.tree, [&](std::size_t i) {
    return atlas.leaves[i].reachable && !atlas.leaves[i].singular;
  });
  const std::vector<int> remap = rank_components(
      lab, atlas.options.volume_floor * atlas.reachable_volume, &atlas.aspects);
  std::vector<int> sign_seen(atlas.aspects.size(), 0);
  std::vector<bool> mixed_sign(atlas.aspects.size(), false);
  for (std::size_t i = 0; i < atlas.leaves.size(); ++i) {
    WorkspaceLeaf& leaf = atlas.leaves[i];
    leaf.aspect = lab.label[i] >= 0 ? remap[static_cast<std::size_t>(lab.label[i])] : -1;
    if (leaf.aspect < 0) continue;
    const auto a = static_cast<std::size_t>(leaf.aspect);
    const int sign = atlas.probes[i].det_min > 0.0f ? 1 : -1;
    if (sign_seen[a] == 0) {
      sign_seen[a] = sign;
    } else if (sign_seen[a] != sign) {
      mixed_sign[a] = true;
    }
  }
  for (std::size_t a = 0; a < atlas.aspects.size(); ++a) {
    atlas.aspects[a].aspect = static_cast<int>(a);
    atlas.aspects[a].det_sign = mixed_sign[a] ? 0 : sign_seen[a];
  }
}

JointAtlas build_joint_atlas(const ManipulatorGeometry& g, int depth,
                             const AtlasOptions& options) {
  if (depth < 1 || depth > kMaxOctreeDepth) {
    throw DepthOutOfRange("joint depth out of range");
  }
  JointAtlas atlas;
  atlas.geometry = g;
  atlas.options = options;
  const PeriodicBox box = joint_box(g);
  const DirectKinematicsSolver solver(g, options.dk);
  ProbeLattice lattice(
      box, depth,
      [](const Eigen::Vector3d&) {
        Sample s;
        s.reachable = true;
        return s;
      },
      [&](const Eigen::Vector3d& v) {
        return static_cast<std::int8_t>(solver.count(JointVector(v)));
      });

  RegionOctree::BuildOptions build;
  build.min_depth = std::max(0, depth - options.coarse_levels);
  build.refine = [&](const Cell& cell, CellClass) {
    return count_varies(summarize(lattice, cell, true));
  };
  atlas.tree = RegionOctree::build(
      box, depth, [](const Cell&) { return CellClass::kFull; }, build);

  const std::size_t n = atlas.tree.leaf_count();
  atlas.leaves.assign(n, JointLeaf{});
  atlas.probes.assign(n, LeafProbes{});
  for (std::size_t i = 0; i < n; ++i) {
    atlas.probes[i] = summarize(lattice, atlas.tree.cell(i), true);
    JointLeaf& leaf = atlas.leaves[i];
    leaf.dk_count = atlas.probes[i].count_center;
    leaf.singular_image = count_varies(atlas.probes[i]) || (leaf.dk_count % 2) != 0;
  }
  std::vector<std::size_t> nb;
  for (std::size_t i = 0; i < n; ++i) {
    if (atlas.tree.depth(i) < depth || atlas.leaves[i].singular_image) continue;
    nb = atlas.tree.neighbors(i);
    for (std::size_t j : nb) {
      if (atlas.leaves[j].dk_count != atlas.leaves[i].dk_count) {
        atlas.leaves[i].singular_image = true;
        break;
      }
    }
  }

  double image_volume = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (atlas.leaves[i].dk_count > 0) image_volume += atlas.tree.volume(i);
  }
  const RegionLabeling lab = connected_components(
      atlas.tree,
      [&](std::size_t i) {
        return !atlas.leaves[i].singular_image && atlas.leaves[i].dk_count > 0;
      },
      [&](std::size_t a, std::size_t b) {
        return atlas.leaves[a].dk_count == atlas.leaves[b].dk_count;
      });
  const std::vector<int> remap =
      rank_components(lab, options.volume_floor * image_volume, &atlas.regions);
  for (std::size_t i = 0; i < n; ++i) {
    if (lab.label[i] < 0) continue;
    const int id = remap[static_cast<std::size_t>(lab.label[i])];
    atlas.leaves[i].joint_region = id;
    atlas.regions[static_cast<std::size_t>(id)].dk_count = atlas.leaves[i].dk_count;
  }
  return atlas;
}

void characteristic_surfaces(WorkspaceAtlas& atlas, const JointAtlas& joint) {
  for (std::size_t i = 0; i < atlas.leaves.size(); ++i) {
    WorkspaceLeaf& leaf = atlas.leaves[i];
    leaf.char_surface = false;
    leaf.image_region = -1;
    if (leaf.aspect < 0) continue;
    const JointVector q = inverse_kinematics(atlas.geometry, atlas.center_pose(i));
    const auto j = joint.leaf_at(q);
    const int region = j ? joint.leaves[*j].joint_region : -1;
    if (region < 0 || joint.regions[static_cast<std::size_t>(region)].artifact) {
      leaf.char_surface = true;
    } else {
      leaf.image_region = region;
    }
  }
}

void basic_regions(WorkspaceAtlas& atlas) {
  const RegionOctree& tree = atlas.tree;
  const std::size_t n = atlas.leaves.size();
  const RegionLabeling lab = connected_components(
      tree,
      [&](std::size_t i) { return atlas.leaves[i].aspect >= 0 && !atlas.leaves[i].char_surface; },
      [&](std::size_t a, std::size_t b) {
        return atlas.leaves[a].aspect == atlas.leaves[b].aspect &&
               atlas.leaves[a].image_region == atlas.leaves[b].image_region;
      });

  const std::vector<int> remap =
      rank_components(lab, atlas.options.volume_floor * atlas.reachable_volume,
                      &atlas.basic_regions);
  for (std::size_t i = 0; i < n; ++i) {
    WorkspaceLeaf& leaf = atlas.leaves[i];
    leaf.basic_region =
        lab.label[i] >= 0 ? remap[static_cast<std::size_t>(lab.label[i])] : -1;
    if (leaf.basic_region >= 0) {
      atlas.basic_regions[static_cast<std::size_t>(leaf.basic_region)].aspect = leaf.aspect;
    }
  }
}

AssociationTable associate_regions(WorkspaceAtlas& atlas,
                                   const JointAtlas& joint) {
  const std::size_t regions = atlas.basic_regions.size();
  std::vector<std::map<int, std::size_t>> votes(regions);
  std::vector<std::size_t> nb;
  for (std::size_t i = 0; i < atlas.leaves.size(); ++i) {
    const int br = atlas.leaves[i].basic_region;
    if (br < 0 || atlas.basic_regions[static_cast<std::size_t>(br)].artifact) continue;
    // Interior leaves only; child-cell centers are points other than the
    // ones that labeled the leaf.
    nb = atlas.tree.neighbors(i);
    if (std::any_of(nb.begin(), nb.end(),
                    [&](std::size_t j) { return atlas.leaves[j].basic_region != br; })) {
      continue;
    }
    const Cell cell = atlas.tree.cell(i);
    for (int c = 0; c < 8; ++c) {
      Eigen::Vector3d v = cell.center;
      for (int a = 0; a < 3; ++a) v[a] += (((c >> a) & 1) ? 0.5 : -0.5) * cell.half_extent[a];
      const JointVector q = inverse_kinematics(atlas.geometry, pose_at(v));
      const auto j = joint.leaf_at(q);
      if (!j) continue;
      const JointLeaf& jl = joint.leaves[*j];
      if (jl.singular_image || jl.joint_region < 0) continue;
      if (joint.regions[static_cast<std::size_t>(jl.joint_region)].artifact) continue;
      ++votes[static_cast<std::size_t>(br)][jl.joint_region];
    }
  }

  AssociationTable table;
  std::map<std::pair<int, int>, std::size_t> row_index;
  for (std::size_t r = 0; r < regions; ++r) {
    ComponentInfo& info = atlas.basic_regions[r];
    if (info.artifact || votes[r].empty()) continue;
    std::size_t total = 0, best = 0;
    int best_region = -1;
    for (const auto& [region, n] : votes[r]) {
      total += n;
      if (n > best) {
        best = n;
        best_region = region;
      }
    }
    const double mismatch = static_cast<double>(total - best) / static_cast<double>(total);
    info.image_mismatch = mismatch;
    if (mismatch > atlas.options.image_mismatch_fraction) {
      throw InconsistentImage("basic region " + std::to_string(r) +
                              " maps onto several joint regions (" +
                              std::to_string(100.0 * mismatch) +
                              "% of samples); increase the octree depth");
    }
    info.joint_region = best_region;
    const auto key = std::make_pair(info.aspect, best_region);
    auto it = row_index.find(key);
    if (it == row_index.end()) {
      it = row_index.emplace(key, table.rows.size()).first;
      table.rows.push_back({info.aspect, best_region, {}});
    }
    table.rows[it->second].basic_regions.push_back(static_cast<int>(r));
  }
  std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.aspect, a.joint_region) < std::tie(b.aspect, b.joint_region);
  });

  const DirectKinematicsSolver solver(atlas.geometry, atlas.options.dk);
  std::vector<std::size_t> seen(regions, 0);
  for (std::size_t i = 0; i < atlas.leaves.size(); ++i) {
    const int br = atlas.leaves[i].basic_region;
    if (br < 0 || atlas.basic_regions[static_cast<std::size_t>(br)].artifact) continue;
    if (seen[static_cast<std::size_t>(br)]++ % 8 != 0) continue;
    ++atlas.basic_regions[static_cast<std::size_t>(br)].samples;
    const Pose p = atlas.center_pose(i);
    DKSolutionSet dk;
    try {
      dk = solver.solve(inverse_kinematics(atlas.geometry, p));
    } catch (const SolverDegeneracy&) {
      continue;  // sample on a double root; the next one will do
    }
    for (const Pose& s : dk.poses) {
      const auto leaf = atlas.tree.find_leaf(s.vector());
      if (!leaf) continue;
      const int other = atlas.leaves[*leaf].basic_region;
      if (other < 0 || other == br || atlas.leaves[*leaf].aspect != atlas.leaves[i].aspect) continue;
      if (atlas.basic_regions[static_cast<std::size_t>(other)].artifact) continue;
      if (table.row_of(br) != table.row_of(other)) continue;
      ++table.witnesses[std::minmax(br, other)];
    }
  }
  for (const auto& [pair, count] : table.witnesses) {
    const int smaller = std::min(atlas.basic_regions[static_cast<std::size_t>(pair.first)].samples,
                                 atlas.basic_regions[static_cast<std::size_t>(pair.second)].samples);
    if (count >= std::max(1.0, atlas.options.association_fraction * smaller)) {
      table.associated_pairs.insert(pair);
    }
  }
  for (AssociationRow& row : table.rows) {
    // Rows hold a handful of regions; try every subset.
    const auto& m = row.basic_regions;
    const std::size_t k = std::min<std::size_t>(m.size(), 16);
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
      bool clique = true;
      for (std::size_t x = 0; x < k && clique; ++x) {
        for (std::size_t y = x + 1; y < k && clique; ++y) {
          if ((mask >> x & 1) && (mask >> y & 1) && !table.associated(m[x], m[y])) {
            clique = false;
          }
        }
      }
      if (clique) row.modes = std::max(row.modes, std::popcount(mask));
    }
  }
  return table;
}

void uniqueness_domains(WorkspaceAtlas& atlas, const AssociationTable& table) {
  const RegionOctree& tree = atlas.tree;
  const std::size_t n = atlas.leaves.size();
  const std::size_t regions = atlas.basic_regions.size();
  auto major_region = [&](int br) {
    return br >= 0 && !atlas.basic_regions[static_cast<std::size_t>(br)].artifact;
  };

  // Grow major basic regions through the free leaves of their aspect
  // (characteristic layers, artifact fragments) and count face contacts
  // where two growth fronts meet.
  std::vector<int> owner(n, -1);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i) {
    if (major_region(atlas.leaves[i].basic_region)) {
      owner[i] = atlas.leaves[i].basic_region;
      queue.push_back(i);
    }
  }
  std::map<std::pair<int, int>, int> contacts;
  std::vector<std::size_t> nb;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    nb = tree.neighbors(u);
    for (std::size_t v : nb) {
      if (atlas.leaves[v].aspect != atlas.leaves[u].aspect) continue;
      if (owner[v] < 0) {
        owner[v] = owner[u];
        queue.push_back(v);
      } else if (owner[v] != owner[u]) {
        ++contacts[std::minmax(owner[u], owner[v])];
      }
    }
  }
  std::vector<std::vector<int>> adjacent(regions);
  for (const auto& [pair, count] : contacts) {
    // Each contact is seen from both sides.
    if (count / 2 < atlas.options.adjacency_contacts) continue;
    adjacent[static_cast<std::size_t>(pair.first)].push_back(pair.second);
    adjacent[static_cast<std::size_t>(pair.second)].push_back(pair.first);
  }

  std::vector<int> modes(regions, 1);
  for (const auto& row : table.rows) {
    for (int br : row.basic_regions) modes[static_cast<std::size_t>(br)] = std::max(1, row.modes);
  }

  std::vector<int> domain_of(regions, -1);
  std::vector<std::vector<int>> members;  // domain -> basic regions
  std::vector<int> domain_aspect;
  atlas.ambiguous_groupings = 0;

  for (std::size_t a = 0; a < atlas.aspects.size(); ++a) {
    std::vector<int> pending;
    for (std::size_t r = 0; r < regions; ++r) {
      if (atlas.basic_regions[r].aspect == static_cast<int>(a) &&
          !atlas.basic_regions[r].artifact) {
        pending.push_back(static_cast<int>(r));
      }
    }
    if (pending.empty()) continue;
    // Most assembly modes first, then larger regions first.
    std::stable_sort(pending.begin(), pending.end(), [&](int x, int y) {
      const auto ux = static_cast<std::size_t>(x), uy = static_cast<std::size_t>(y);
      if (modes[ux] != modes[uy]) return modes[ux] > modes[uy];
      return atlas.basic_regions[ux].volume > atlas.basic_regions[uy].volume;
    });

    // Breadth-first order from the seeds (the leading region and the regions
    // associated with it) over the adjacency graph; unreached regions follow.
    std::vector<int> order;
    std::vector<bool> queued(regions, false);
    const int lead = pending.front();
    for (int br : pending) {
      if (br == lead || table.associated(lead, br)) {
        order.push_back(br);
        queued[static_cast<std::size_t>(br)] = true;
      }
    }
    const std::size_t seeds = order.size();
    for (std::size_t head = 0; order.size() < pending.size();) {
      if (head == order.size()) {
        for (int br : pending) {
          if (!queued[static_cast<std::size_t>(br)]) {
            order.push_back(br);
            queued[static_cast<std::size_t>(br)] = true;
            break;
          }
        }
      }
      std::vector<int> next = adjacent[static_cast<std::size_t>(order[head++])];
      std::sort(next.begin(), next.end());
      for (int br : next) {
        if (!queued[static_cast<std::size_t>(br)] &&
            atlas.basic_regions[static_cast<std::size_t>(br)].aspect == static_cast<int>(a) &&
            !atlas.basic_regions[static_cast<std::size_t>(br)].artifact) {
          order.push_back(br);
          queued[static_cast<std::size_t>(br)] = true;
        }
      }
    }

    const Grouping grouping = group_regions(order, seeds, adjacent, table);
    if (grouping.solutions > 1) ++atlas.ambiguous_groupings;
    const int base = static_cast<int>(members.size());
    for (int d = 0; d < grouping.domains; ++d) {
      members.emplace_back();
      domain_aspect.push_back(static_cast<int>(a));
    }
    for (std::size_t k = 0; k < order.size(); ++k) {
      const int d = base + grouping.domain[k];
      domain_of[static_cast<std::size_t>(order[k])] = d;
      members[static_cast<std::size_t>(d)].push_back(order[k]);
    }
  }

  // Leaf labels; free leaves take the lowest adjacent domain, one layer per
  // pass.
  std::vector<int> label(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const int br = atlas.leaves[i].basic_region;
    if (major_region(br)) label[i] = domain_of[static_cast<std::size_t>(br)];
  }
  for (;;) {
    std::vector<std::pair<std::size_t, int>> updates;
    for (std::size_t i = 0; i < n; ++i) {
      if (label[i] >= 0 || atlas.leaves[i].aspect < 0) continue;
      int best = -1;
      nb = tree.neighbors(i);
      for (std::size_t j : nb) {
        if (label[j] < 0 || atlas.leaves[j].aspect != atlas.leaves[i].aspect) continue;
        if (best < 0 || label[j] < best) best = label[j];
      }
      if (best >= 0) updates.emplace_back(i, best);
    }
    if (updates.empty()) break;
    for (const auto& [i, d] : updates) label[i] = d;
  }

  atlas.domains.assign(members.size(), ComponentInfo{});
  for (std::size_t d = 0; d < members.size(); ++d) {
    atlas.domains[d].id = static_cast<int>(d);
    atlas.domains[d].aspect = domain_aspect[d];
  }
  for (std::size_t i = 0; i < n; ++i) {
    atlas.leaves[i].domain = label[i];
    if (label[i] >= 0) {
      atlas.domains[static_cast<std::size_t>(label[i])].volume += tree.volume(i);
    }
  }
  const double floor_volume = atlas.options.volume_floor * atlas.reachable_volume;
  for (auto& d : atlas.domains) d.artifact = d.volume < floor_volume;
}

Location locate(const WorkspaceAtlas& atlas, const Pose& p) {
  const auto leaf = atlas.tree.find_leaf(p.vector());
  if (!leaf) {
    throw OutOfBox("pose (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                   ") lies outside the workspace box");
  }
  const WorkspaceLeaf& l = atlas.leaves[*leaf];
  Location out;
  out.leaf = *leaf;
  out.reachable = l.reachable;
  out.boundary = l.boundary;
  out.singular = l.singular;
  out.char_surface = l.char_surface;
  out.image_region = l.image_region;
  out.component = l.component;
  if (l.aspect >= 0) out.aspect = l.aspect;
  if (l.basic_region >= 0) out.basic_region = l.basic_region;
  if (l.domain >= 0) out.domain = l.domain;
  return out;
}

Analysis analyze(const ManipulatorGeometry& g, int workspace_depth,
                 int joint_depth, const AtlasOptions& options) {
  Analysis out;
  out.workspace = build_workspace(g, workspace_depth, options);
  extract_singular_set(out.workspace);
  compute_aspects(out.workspace);
  out.joint = build_joint_atlas(g, joint_depth, options);
  characteristic_surfaces(out.workspace, out.joint);
  basic_regions(out.workspace);
  out.table = associate_regions(out.workspace, out.joint);
  uniqueness_domains(out.workspace, out.table);
  return out;
}

}  // namespace pkatlas
