#ifndef PKATLAS_OCTREE_HPP
#define PKATLAS_OCTREE_HPP

// Octree over an axis-aligned box in which any axis may be periodic. The
// workspace tree uses (x, y, phi) with phi periodic, which gives the pose
// space its torus structure; the joint-space tree has no periodic axis.
//
// Leaves are stored in depth-first octant order. Octant bit 0 selects the
// upper half along axis 0, bit 1 along axis 1, bit 2 along axis 2.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace pkatlas {

inline constexpr int kMaxOctreeDepth = 12;

struct PeriodicBox {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Ones();
  std::array<bool, 3> periodic{false, false, false};

  /// (x, y, phi) box with phi spanning [0, 2*pi) periodically.
  static PeriodicBox pose_space(double x_lo, double x_hi, double y_lo,
                                double y_hi);

  Eigen::Vector3d extent() const { return hi - lo; }
  double volume() const { return extent().prod(); }
};

enum class CellClass : std::uint8_t { kFull, kEmpty, kMixed };

char class_code(CellClass c);

struct Cell {
  int depth = 0;
  std::array<std::uint32_t, 3> index{0, 0, 0};  // grid index at this depth
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extent = Eigen::Vector3d::Zero();

  Eigen::Vector3d lo() const { return center - half_extent; }
  Eigen::Vector3d hi() const { return center + half_extent; }
  double volume() const { return 8.0 * half_extent.prod(); }

  /// Octant choices from the root down to this cell.
  std::vector<int> path() const;
};

class RegionOctree {
 public:
  using Classifier = std::function<CellClass(const Cell&)>;
  /// Asked for FULL/EMPTY cells above max depth; true forces a split.
  using Refiner = std::function<bool(const Cell&, CellClass)>;

  struct BuildOptions {
    /// Non-EMPTY cells shallower than this are always split.
    int min_depth = 0;
    Refiner refine;
  };

  RegionOctree() = default;

  /// Recursive subdivision of MIXED cells down to max_depth.
  /// Throws DepthOutOfRange unless 1 <= max_depth <= kMaxOctreeDepth.
  static RegionOctree build(const PeriodicBox& box, int max_depth,
                            const Classifier& classify,
                            const BuildOptions& options);
  static RegionOctree build(const PeriodicBox& box, int max_depth,
                            const Classifier& classify) {
    return build(box, max_depth, classify, BuildOptions{});
  }

  struct LeafSpec {
    int depth;
    std::array<std::uint32_t, 3> index;
    CellClass cls;
  };
  /// Rebuilds a tree from leaves listed in depth-first octant order.
  /// Throws Error if the leaves do not tile the box.
  static RegionOctree from_leaves(const PeriodicBox& box, int max_depth,
                                  const std::vector<LeafSpec>& leaves);

  const PeriodicBox& box() const { return box_; }
  int max_depth() const { return max_depth_; }
  std::size_t leaf_count() const { return leaves_.size(); }

  Cell cell(std::size_t leaf) const;
  Cell make_cell(int depth, const std::array<std::uint32_t, 3>& index) const;
  CellClass cell_class(std::size_t leaf) const { return classes_[leaf]; }
  int depth(std::size_t leaf) const { return leaves_[leaf].depth; }
  double volume(std::size_t leaf) const;

  /// Face-adjacent leaves, seams of periodic axes included. Sorted, unique,
  /// never contains the leaf itself.
  std::vector<std::size_t> neighbors(std::size_t leaf) const;

  /// Leaves across one face: axis in [0, 3), direction +1 or -1.
  void face_neighbors(std::size_t leaf, int axis, int direction,
                      std::vector<std::size_t>* out) const;

  /// Leaf containing a point; periodic coordinates are wrapped first.
  /// Empty when the point is outside a non-periodic range.
  std::optional<std::size_t> find_leaf(const Eigen::Vector3d& point) const;

  /// Wraps periodic coordinates into [lo, hi).
  Eigen::Vector3d wrap(const Eigen::Vector3d& point) const;

 private:
  struct Node {
    std::int32_t first_child = -1;
    std::int32_t leaf = -1;
  };
  struct LeafKey {
    std::uint8_t depth;
    std::array<std::uint32_t, 3> index;
  };

  std::int32_t descend(int depth, const std::array<std::uint32_t, 3>& index,
                       int* reached_depth) const;
  void collect_face(std::int32_t node, int axis, int side,
                    std::vector<std::size_t>* out) const;

  PeriodicBox box_;
  int max_depth_ = 0;
  std::vector<Node> nodes_;
  std::vector<LeafKey> leaves_;
  std::vector<CellClass> classes_;
};

struct RegionLabeling {
  std::vector<int> label;  // per leaf; -1 where the predicate is false
  int component_count = 0;
  std::vector<double> component_volume;

  /// Sum of leaf volumes carrying the id. Throws UnknownId.
  double measure(int id) const;
};

using LeafPredicate = std::function<bool(std::size_t)>;
using LeafJoin = std::function<bool(std::size_t, std::size_t)>;

/// Face-connected components of the leaves satisfying the predicate. When
/// join is given, two adjacent satisfying leaves merge only if join(a, b).
/// Ids are dense and numbered by first appearance in leaf order.
RegionLabeling connected_components(const RegionOctree& tree,
                                    const LeafPredicate& predicate,
                                    const LeafJoin& join = {});

using Attributes = std::vector<std::pair<std::string, double>>;
using AttributeSelector = std::function<Attributes(std::size_t)>;

/// Writes the `pkatlas-voxels v1` text format, one record per leaf.
void export_voxels(const RegionOctree& tree, const AttributeSelector& select,
                   const std::string& path);

struct VoxelImport {
  RegionOctree tree;
  std::vector<Attributes> attributes;
};

/// Reads an export back. The box and depth are not part of the format.
VoxelImport import_voxels(const std::string& path, const PeriodicBox& box,
                          int max_depth);

}  // namespace pkatlas

#endif  // PKATLAS_OCTREE_HPP
