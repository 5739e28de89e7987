#include "pkatlas/octree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include "pkatlas/error.hpp"
#include "pkatlas/kinematics.hpp"

namespace pkatlas {

PeriodicBox PeriodicBox::pose_space(double x_lo, double x_hi, double y_lo,
                                    double y_hi) {
  PeriodicBox box;
  box.lo = Eigen::Vector3d(x_lo, y_lo, 0.0);
  box.hi = Eigen::Vector3d(x_hi, y_hi, kTwoPi<double>);
  box.periodic = {false, false, true};
  return box;
}

char class_code(CellClass c) {
  switch (c) {
    case CellClass::kFull:
      return 'F';
    case CellClass::kEmpty:
      return 'E';
    case CellClass::kMixed:
      return 'M';
  }
  return '?';
}

std::vector<int> Cell::path() const {
  std::vector<int> out(static_cast<std::size_t>(depth));
  for (int level = 0; level < depth; ++level) {
    const int bit = depth - 1 - level;
    int octant = 0;
    for (int a = 0; a < 3; ++a) octant |= static_cast<int>((index[a] >> bit) & 1u) << a;
    out[static_cast<std::size_t>(level)] = octant;
  }
  return out;
}

Cell RegionOctree::make_cell(int depth,
                             const std::array<std::uint32_t, 3>& index) const {
  Cell c;
  c.depth = depth;
  c.index = index;
  const double cells = std::ldexp(1.0, depth);
  const Eigen::Vector3d width = box_.extent() / cells;
  for (int a = 0; a < 3; ++a) {
    c.center[a] = box_.lo[a] + (index[a] + 0.5) * width[a];
  }
  c.half_extent = 0.5 * width;
  return c;
}

Cell RegionOctree::cell(std::size_t leaf) const {
  const LeafKey& k = leaves_[leaf];
  return make_cell(k.depth, k.index);
}

double RegionOctree::volume(std::size_t leaf) const {
  return std::ldexp(box_.volume(), -3 * leaves_[leaf].depth);
}

RegionOctree RegionOctree::build(const PeriodicBox& box, int max_depth,
                                 const Classifier& classify,
                                 const BuildOptions& options) {
  if (max_depth < 1 || max_depth > kMaxOctreeDepth) {
    throw DepthOutOfRange("octree depth " + std::to_string(max_depth) +
                          " outside [1, " + std::to_string(kMaxOctreeDepth) +
                          "]");
  }
  RegionOctree t;
  t.box_ = box;
  t.max_depth_ = max_depth;
  t.nodes_.emplace_back();

  struct Frame {
    std::int32_t node;
    int depth;
    std::array<std::uint32_t, 3> index;
  };
  // Explicit stack; children pushed in reverse so octant 0 is visited first.
  std::vector<Frame> stack{{0, 0, {0, 0, 0}}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    const Cell c = t.make_cell(f.depth, f.index);
    const CellClass cls = classify(c);
    bool split = false;
    if (f.depth < max_depth) {
      if (cls == CellClass::kMixed) {
        split = true;
      } else if (cls != CellClass::kEmpty && f.depth < options.min_depth) {
        split = true;
      } else if (options.refine) {
        split = options.refine(c, cls);
      }
    }
    if (!split) {
      t.nodes_[static_cast<std::size_t>(f.node)].leaf =
          static_cast<std::int32_t>(t.leaves_.size());
      t.leaves_.push_back({static_cast<std::uint8_t>(f.depth), f.index});
      t.classes_.push_back(cls);
      continue;
    }
    const auto first = static_cast<std::int32_t>(t.nodes_.size());
    t.nodes_[static_cast<std::size_t>(f.node)].first_child = first;
    t.nodes_.resize(t.nodes_.size() + 8);
    for (int oct = 7; oct >= 0; --oct) {
      std::array<std::uint32_t, 3> child;
      for (int a = 0; a < 3; ++a) {
        child[a] = 2 * f.index[a] + ((static_cast<std::uint32_t>(oct) >> a) & 1u);
      }
      stack.push_back({first + oct, f.depth + 1, child});
    }
  }
  return t;
}

RegionOctree RegionOctree::from_leaves(const PeriodicBox& box, int max_depth,
                                       const std::vector<LeafSpec>& leaves) {
  if (max_depth < 1 || max_depth > kMaxOctreeDepth) {
    throw DepthOutOfRange("octree depth out of range");
  }
  RegionOctree t;
  t.box_ = box;
  t.max_depth_ = max_depth;
  t.nodes_.emplace_back();
  std::uint64_t units = 0;
  for (const LeafSpec& spec : leaves) {
    if (spec.depth < 0 || spec.depth > max_depth) {
      throw Error("leaf depth exceeds tree depth");
    }
    std::int32_t node = 0;
    for (int level = 0; level < spec.depth; ++level) {
      if (t.nodes_[static_cast<std::size_t>(node)].leaf >= 0) {
        throw Error("overlapping leaves");
      }
      if (t.nodes_[static_cast<std::size_t>(node)].first_child < 0) {
        const auto first = static_cast<std::int32_t>(t.nodes_.size());
        t.nodes_[static_cast<std::size_t>(node)].first_child = first;
        t.nodes_.resize(t.nodes_.size() + 8);
      }
      const int bit = spec.depth - 1 - level;
      int oct = 0;
      for (int a = 0; a < 3; ++a) {
        oct |= static_cast<int>((spec.index[a] >> bit) & 1u) << a;
      }
      node = t.nodes_[static_cast<std::size_t>(node)].first_child + oct;
    }
    Node& n = t.nodes_[static_cast<std::size_t>(node)];
    if (n.leaf >= 0 || n.first_child >= 0) throw Error("overlapping leaves");
    n.leaf = static_cast<std::int32_t>(t.leaves_.size());
    t.leaves_.push_back({static_cast<std::uint8_t>(spec.depth), spec.index});
    t.classes_.push_back(spec.cls);
    units += std::uint64_t{1} << (3 * (max_depth - spec.depth));
  }
  if (units != (std::uint64_t{1} << (3 * max_depth))) {
    throw Error("leaves do not tile the box");
  }
  // Leaf order must be the depth-first octant order of the rebuilt tree.
  std::int32_t expected = 0;
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node n = t.nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (n.leaf >= 0) {
      if (n.leaf != expected++) throw Error("leaves not in depth-first order");
      continue;
    }
    for (int oct = 7; oct >= 0; --oct) stack.push_back(n.first_child + oct);
  }
  return t;
}

std::int32_t RegionOctree::descend(int depth,
                                   const std::array<std::uint32_t, 3>& index,
                                   int* reached_depth) const {
  std::int32_t node = 0;
  int level = 0;
  for (; level < depth; ++level) {
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    if (n.leaf >= 0) break;
    const int bit = depth - 1 - level;
    int oct = 0;
    for (int a = 0; a < 3; ++a) {
      oct |= static_cast<int>((index[a] >> bit) & 1u) << a;
    }
    node = n.first_child + oct;
  }
  if (reached_depth) *reached_depth = level;
  return node;
}

void RegionOctree::collect_face(std::int32_t node, int axis, int side,
                                std::vector<std::size_t>* out) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  if (n.leaf >= 0) {
    out->push_back(static_cast<std::size_t>(n.leaf));
    return;
  }
  for (int oct = 0; oct < 8; ++oct) {
    if (((oct >> axis) & 1) == side) collect_face(n.first_child + oct, axis, side, out);
  }
}

void RegionOctree::face_neighbors(std::size_t leaf, int axis, int direction,
                                  std::vector<std::size_t>* out) const {
  const LeafKey& k = leaves_[leaf];
  const std::int64_t size = std::int64_t{1} << k.depth;
  std::int64_t n = static_cast<std::int64_t>(k.index[axis]) + direction;
  if (n < 0 || n >= size) {
    if (!box_.periodic[axis]) return;
    n = (n + size) % size;
  }
  std::array<std::uint32_t, 3> index = k.index;
  index[axis] = static_cast<std::uint32_t>(n);
  const std::int32_t node = descend(k.depth, index, nullptr);
  const std::size_t before = out->size();
  collect_face(node, axis, direction > 0 ? 0 : 1, out);
  // Drop the leaf itself (a periodic axis one cell wide).
  out->erase(std::remove(out->begin() + static_cast<std::ptrdiff_t>(before),
                         out->end(), leaf),
             out->end());
}

std::vector<std::size_t> RegionOctree::neighbors(std::size_t leaf) const {
  std::vector<std::size_t> out;
  for (int axis = 0; axis < 3; ++axis) {
    face_neighbors(leaf, axis, +1, &out);
    face_neighbors(leaf, axis, -1, &out);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Eigen::Vector3d RegionOctree::wrap(const Eigen::Vector3d& point) const {
  Eigen::Vector3d p = point;
  for (int a = 0; a < 3; ++a) {
    if (!box_.periodic[a]) continue;
    const double span = box_.hi[a] - box_.lo[a];
    double w = p[a] - box_.lo[a];
    w -= span * std::floor(w / span);
    if (!(w < span)) w = 0.0;
    p[a] = box_.lo[a] + w;
  }
  return p;
}

std::optional<std::size_t> RegionOctree::find_leaf(
    const Eigen::Vector3d& point) const {
  const Eigen::Vector3d p = wrap(point);
  const std::int64_t cells = std::int64_t{1} << max_depth_;
  std::array<std::uint32_t, 3> index;
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(p[a])) return std::nullopt;
    if (!box_.periodic[a] && (p[a] < box_.lo[a] || p[a] > box_.hi[a])) {
      return std::nullopt;
    }
    const double t = (p[a] - box_.lo[a]) / (box_.hi[a] - box_.lo[a]);
    auto i = static_cast<std::int64_t>(std::floor(t * static_cast<double>(cells)));
    i = std::clamp<std::int64_t>(i, 0, cells - 1);
    index[a] = static_cast<std::uint32_t>(i);
  }
  const std::int32_t node = descend(max_depth_, index, nullptr);
  return static_cast<std::size_t>(nodes_[static_cast<std::size_t>(node)].leaf);
}

double RegionLabeling::measure(int id) const {
  if (id < 0 || id >= component_count) {
    throw UnknownId("component id " + std::to_string(id) + " unknown");
  }
  return component_volume[static_cast<std::size_t>(id)];
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    std::size_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const std::size_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

}  // namespace

RegionLabeling connected_components(const RegionOctree& tree,
                                    const LeafPredicate& predicate,
                                    const LeafJoin& join) {
  const std::size_t n = tree.leaf_count();
  std::vector<char> inside(n);
  for (std::size_t i = 0; i < n; ++i) inside[i] = predicate(i) ? 1 : 0;

  DisjointSets sets(n);
  std::vector<std::size_t> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    if (!inside[i]) continue;
    // Every face is seen from the cell on its lower side.
    for (int axis = 0; axis < 3; ++axis) {
      scratch.clear();
      tree.face_neighbors(i, axis, +1, &scratch);
      for (std::size_t j : scratch) {
        if (!inside[j]) continue;
        if (join && !join(i, j)) continue;
        sets.unite(i, j);
      }
    }
  }

  RegionLabeling out;
  out.label.assign(n, -1);
  std::vector<int> root_id(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!inside[i]) continue;
    const std::size_t r = sets.find(i);
    if (root_id[r] < 0) {
      root_id[r] = out.component_count++;
      out.component_volume.push_back(0.0);
    }
    out.label[i] = root_id[r];
    out.component_volume[static_cast<std::size_t>(root_id[r])] += tree.volume(i);
  }
  return out;
}

void export_voxels(const RegionOctree& tree, const AttributeSelector& select,
                   const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(
      std::fopen(path.c_str(), "w"), &std::fclose);
  if (!file) throw IoError("cannot open " + path + " for writing");
  std::fputs("pkatlas-voxels v1\n", file.get());
  for (std::size_t i = 0; i < tree.leaf_count(); ++i) {
    const Cell c = tree.cell(i);
    std::fprintf(file.get(), "%.9g %.9g %.9g %.9g %.9g %.9g %c", c.center[0],
                 c.center[1], c.center[2], c.half_extent[0], c.half_extent[1],
                 c.half_extent[2], class_code(tree.cell_class(i)));
    if (select) {
      for (const auto& [name, value] : select(i)) {
        std::fprintf(file.get(), " %s=%.9g", name.c_str(), value);
      }
    }
    std::fputc('\n', file.get());
  }
  if (std::ferror(file.get())) throw IoError("write failed: " + path);
}

VoxelImport import_voxels(const std::string& path, const PeriodicBox& box,
                          int max_depth) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "pkatlas-voxels v1") {
    throw IoError(path + ": missing pkatlas-voxels v1 header");
  }
  std::vector<RegionOctree::LeafSpec> specs;
  std::vector<Attributes> attributes;
  const Eigen::Vector3d extent = box.extent();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    Eigen::Vector3d center, half;
    char code = 0;
    row >> center[0] >> center[1] >> center[2] >> half[0] >> half[1] >> half[2] >>
        code;
    if (!row) throw IoError(path + ": malformed record: " + line);
    RegionOctree::LeafSpec spec;
    spec.depth = static_cast<int>(std::lround(std::log2(extent[0] / (2.0 * half[0]))));
    const double cells = std::ldexp(1.0, spec.depth);
    for (int a = 0; a < 3; ++a) {
      const double width = extent[a] / cells;
      spec.index[a] = static_cast<std::uint32_t>(
          std::lround((center[a] - box.lo[a]) / width - 0.5));
    }
    switch (code) {
      case 'F':
        spec.cls = CellClass::kFull;
        break;
      case 'E':
        spec.cls = CellClass::kEmpty;
        break;
      case 'M':
        spec.cls = CellClass::kMixed;
        break;
      default:
        throw IoError(path + ": unknown cell class");
    }
    Attributes attrs;
    std::string token;
    while (row >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) throw IoError(path + ": bad attribute " + token);
      attrs.emplace_back(token.substr(0, eq), std::stod(token.substr(eq + 1)));
    }
    specs.push_back(spec);
    attributes.push_back(std::move(attrs));
  }
  VoxelImport out;
  out.tree = RegionOctree::from_leaves(box, max_depth, specs);
  out.attributes = std::move(attributes);
  return out;
}

}  // namespace pkatlas
