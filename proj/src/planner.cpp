#include "pkatlas/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <queue>

#include <Eigen/SVD>

#include "pkatlas/error.hpp"

namespace pkatlas {

namespace {

Pose pose_of(const Eigen::Vector3d& v) { return Pose(v[0], v[1], v[2]); }

// Shifts periodic coordinates of v by whole periods to lie nearest ref.
Eigen::Vector3d unwrap_near(const PeriodicBox& box, const Eigen::Vector3d& ref,
                            Eigen::Vector3d v) {
  for (int a = 0; a < 3; ++a) {
    if (!box.periodic[a]) continue;
    const double period = box.hi[a] - box.lo[a];
    v[a] -= period * std::round((v[a] - ref[a]) / period);
  }
  return v;
}

double metric_length(const PoseMetric& m, const Eigen::Vector3d& d) {
  return std::sqrt(d[0] * d[0] + d[1] * d[1] + m.w_phi * m.w_phi * d[2] * d[2]);
}

// Center of the face shared by two adjacent leaves, in the frame of a.
Eigen::Vector3d face_center(const RegionOctree& tree, std::size_t a, std::size_t b) {
  const Cell ca = tree.cell(a);
  const Cell cb = tree.cell(b);
  const Eigen::Vector3d cb_center = unwrap_near(tree.box(), ca.center, cb.center);
  int axis = 0;
  double best = -1.0;
  for (int k = 0; k < 3; ++k) {
    const double r = std::abs(cb_center[k] - ca.center[k]) /
                     (ca.half_extent[k] + cb.half_extent[k]);
    if (r > best) {
      best = r;
      axis = k;
    }
  }
  Eigen::Vector3d f;
  for (int k = 0; k < 3; ++k) {
    if (k == axis) {
      f[k] = ca.center[k] + (cb_center[k] > ca.center[k] ? 1.0 : -1.0) * ca.half_extent[k];
    } else {
      const double lo = std::max(ca.center[k] - ca.half_extent[k],
                                 cb_center[k] - cb.half_extent[k]);
      const double hi = std::min(ca.center[k] + ca.half_extent[k],
                                 cb_center[k] + cb.half_extent[k]);
      f[k] = 0.5 * (lo + hi);
    }
  }
  return f;
}

struct TrackOutcome {
  enum class Status { kOk, kLost, kAmbiguous };
  std::vector<Pose> poses;
  Status status = Status::kOk;
  std::size_t index = 0;
  std::string what;
};

// Tracks joints[begin, end) starting from `initial` at joints[begin].
TrackOutcome track(const DirectKinematicsSolver& solver, const PoseMetric& metric,
                   const std::vector<JointVector>& joints, std::size_t begin,
                   std::size_t end, const Pose& initial, double step) {
  TrackOutcome out;
  const ManipulatorGeometry& g = solver.geometry();
  if (closure_residual(g, initial, joints[begin]) > 1e-6) {
    out.status = TrackOutcome::Status::kLost;
    out.index = begin;
    out.what = "initial pose does not solve the first joint vector";
    return out;
  }
  out.poses.push_back(initial);
  Pose prev = initial;
  for (std::size_t i = begin + 1; i < end; ++i) {
    DKSolutionSet set;
    try {
      set = solver.solve(joints[i]);
    } catch (const SolverDegeneracy& e) {
      out.status = TrackOutcome::Status::kLost;
      out.index = i;
      out.what = e.what();
      return out;
    }
    if (set.empty()) {
      out.status = TrackOutcome::Status::kLost;
      out.index = i;
      out.what = "joint vector has no assembly mode";
      return out;
    }
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = d1;
    std::size_t nearest = 0;
    for (std::size_t k = 0; k < set.size(); ++k) {
      const double d = metric.distance(prev, set.poses[k]);
      if (d < d1) {
        d2 = d1;
        d1 = d;
        nearest = k;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (d1 > 4.0 * step) {
      out.status = TrackOutcome::Status::kLost;
      out.index = i;
      out.what = "tracked assembly mode vanished (nearest solution jumped)";
      return out;
    }
    if (d2 < 2.0 * step) {
      out.status = TrackOutcome::Status::kAmbiguous;
      out.index = i;
      out.what = "two assembly modes within two steps";
      return out;
    }
    prev = set.poses[nearest];
    out.poses.push_back(prev);
  }
  return out;
}

struct Sample {
  Eigen::Vector3d point;  // unwrapped
  char flag = '-';
};

struct SegmentCrossing {
  Eigen::Vector3d a, b;  // segment holding the crossing
  double t = 0.0;
};

enum class Mode { kSameDomain, kNonsingular, kSingular };

int dk_count(const DirectKinematicsSolver& solver, const Eigen::Vector3d& v) {
  return solver.count(inverse_kinematics(solver.geometry(), pose_of(v)));
}

ReflectBack reflect_check(const ManipulatorGeometry& g, const PoseMetric& metric,
                          const SegmentCrossing& c, double h) {
  ReflectBack out;
  const Eigen::Vector3d dir = c.b - c.a;
  const double len = metric_length(metric, dir);
  const Eigen::Vector3d unit = dir / len;
  const Eigen::Vector3d center = c.a + c.t * dir;
  const Pose p_star = pose_of(center);
  const JointVector q_star = inverse_kinematics(g, p_star);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(jacobians(g, p_star).A, Eigen::ComputeFullU);
  const Eigen::Vector3d w = svd.matrixU().col(2);
  auto normal = [&](double s) {
    return w.dot(inverse_kinematics(g, pose_of(center + s * unit)) - q_star);
  };
  auto rate = [&](double s) {
    const double d = 1e-3 * h;
    return (normal(s + d) - normal(s - d)) / (2.0 * d);
  };
  out.h = h;
  out.normal_before = normal(-h);
  out.normal_after = normal(h);
  const double half = normal(0.5 * h);
  out.quadratic_ratio = half != 0.0 ? out.normal_after / half : 0.0;
  out.rate_before = rate(-h);
  out.rate_after = rate(h);
  const bool same_side = out.normal_before * out.normal_after > 0.0;
  const bool quadratic = out.quadratic_ratio > 3.0 && out.quadratic_ratio < 5.0;
  const bool reverses = out.rate_before * out.rate_after < 0.0;
  out.detected = same_side && quadratic && reverses;
  return out;
}

PlanResult build_plan(const WorkspaceAtlas& atlas, const Pose& start, const Pose& goal,
                      PlanClass cls, Mode mode, const PlannerOptions& options) {
  const ManipulatorGeometry& g = atlas.geometry;
  const PoseMetric metric = PoseMetric::for_geometry(g);
  const DirectKinematicsSolver solver(g, options.dk);
  const RegionOctree& tree = atlas.tree;

  PlanResult out;
  out.plan_class = cls;
  out.start = start;
  out.goal = goal;
  const std::size_t s_leaf = *tree.find_leaf(start.vector());
  const std::size_t g_leaf = *tree.find_leaf(goal.vector());
  const WorkspaceLeaf& sl = atlas.leaves[s_leaf];

  LeafFilter passable;
  EdgeCost cost;
  switch (mode) {
    case Mode::kSameDomain:
      passable = [&](std::size_t i) {
        const WorkspaceLeaf& l = atlas.leaves[i];
        return l.aspect == sl.aspect && l.domain == sl.domain;
      };
      break;
    case Mode::kNonsingular:
      passable = [&](std::size_t i) { return atlas.leaves[i].aspect == sl.aspect; };
      break;
    case Mode::kSingular:
      passable = [&](std::size_t i) {
        const WorkspaceLeaf& l = atlas.leaves[i];
        return l.reachable && (l.aspect >= 0 || l.singular);
      };
      cost = [&](std::size_t a, std::size_t b) {
        const double d = center_distance(atlas, a, b);
        return atlas.leaves[b].singular ? options.singular_cost * d : d;
      };
      break;
  }
  const auto path = astar(atlas, s_leaf, g_leaf, passable, cost);
  if (!path) {
    throw NotFound("no leaf path between the query poses; the atlas region is disconnected");
  }
  out.leaf_path = *path;

  std::vector<Eigen::Vector3d> way{start.vector()};
  for (std::size_t k = 0; k + 1 < path->size(); ++k) {
    way.push_back(unwrap_near(tree.box(), way.back(),
                              face_center(tree, (*path)[k], (*path)[k + 1])));
  }
  way.push_back(unwrap_near(tree.box(), way.back(), goal.vector()));

  double h = options.step > 0.0 ? options.step : default_step(atlas);
  for (int refinement = 0;; ++refinement) {
    // Dense samples along the polyline.
    std::vector<Eigen::Vector3d> pts;
    std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> seg_of;  // per sample
    for (std::size_t k = 0; k + 1 < way.size(); ++k) {
      const Eigen::Vector3d d = way[k + 1] - way[k];
      const double len = metric_length(metric, d);
      if (len < 1e-14) continue;
      const int n = std::max(1, static_cast<int>(std::ceil(len / h)));
      for (int j = 0; j < n; ++j) {
        pts.push_back(way[k] + (static_cast<double>(j) / n) * d);
        seg_of.emplace_back(way[k], way[k + 1]);
      }
    }
    pts.push_back(way.back());
    seg_of.emplace_back(way.back(), way.back());

    std::vector<double> det(pts.size());
    std::vector<int> count(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      det[i] = det_A(g, pose_of(pts[i]));
      count[i] = dk_count(solver, pts[i]);
    }

    std::vector<Sample> samples;
    std::vector<Crossing> crossings;
    std::vector<SegmentCrossing> singular_segments;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      samples.push_back({pts[i], '-'});
      if (i + 1 == pts.size()) break;
      const Eigen::Vector3d a = pts[i], b = pts[i + 1];
      if ((det[i] < 0.0) != (det[i + 1] < 0.0)) {
        double lo = 0.0, hi = 1.0;
        const bool neg_lo = det[i] < 0.0;
        double t = 0.5, d = 0.0;
        for (int it = 0; it < 200; ++it) {
          t = 0.5 * (lo + hi);
          d = det_A(g, pose_of(a + t * (b - a)));
          if (std::abs(d) < 1e-3 * options.crossing_det_tolerance) break;
          if ((d < 0.0) == neg_lo) {
            lo = t;
          } else {
            hi = t;
          }
          if (hi - lo < 1e-16) break;
        }
        const Eigen::Vector3d c = a + t * (b - a);
        samples.push_back({c, 'S'});
        crossings.push_back({Crossing::Kind::kSingular, pose_of(c), samples.size() - 1, d});
        // Locate the crossing on its polyline segment for the local analysis.
        const auto& [sa, sb] = seg_of[i];
        const double seg_len = metric_length(metric, sb - sa);
        const double along = metric_length(metric, c - sa) / seg_len;
        singular_segments.push_back({sa, sb, along});
        continue;
      }
      double t_lo = 0.0;
      int c_lo = count[i];
      for (int guard = 0; guard < 6 && c_lo != count[i + 1]; ++guard) {
        double lo = t_lo, hi = 1.0;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (dk_count(solver, a + mid * (b - a)) == c_lo) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        const double t = 0.5 * (lo + hi);
        const Eigen::Vector3d c = a + t * (b - a);
        samples.push_back({c, 'C'});
        crossings.push_back({Crossing::Kind::kCharacteristic, pose_of(c),
                             samples.size() - 1, det_A(g, pose_of(c))});
        t_lo = hi;
        c_lo = dk_count(solver, a + hi * (b - a));
      }
    }

    out.workspace_path.clear();
    out.joint_trajectory.clear();
    for (const Sample& s : samples) {
      out.workspace_path.push_back(pose_of(s.point));
      out.joint_trajectory.push_back(inverse_kinematics(g, out.workspace_path.back()));
    }
    out.crossings = crossings;
    out.step = h;

    // Continuation, restarted past every singular crossing.
    const std::size_t n = samples.size();
    std::vector<bool> skip(n, false);
    for (const Crossing& c : crossings) {
      if (c.kind != Crossing::Kind::kSingular) continue;
      for (std::size_t i = 0; i < n; ++i) {
        if (metric.distance(out.workspace_path[i], c.pose) < 2.0 * h) skip[i] = true;
      }
    }
    out.tracked.assign(out.workspace_path.begin(), out.workspace_path.end());
    TrackOutcome failure;
    bool ambiguous = false;
    for (std::size_t begin = 0; begin < n;) {
      if (skip[begin]) {
        ++begin;
        continue;
      }
      std::size_t end = begin;
      while (end < n && !skip[end]) ++end;
      TrackOutcome t = track(solver, metric, out.joint_trajectory, begin, end,
                             out.workspace_path[begin], h);
      if (t.status != TrackOutcome::Status::kOk) {
        failure = t;
        ambiguous = t.status == TrackOutcome::Status::kAmbiguous;
        break;
      }
      std::copy(t.poses.begin(), t.poses.end(),
                out.tracked.begin() + static_cast<std::ptrdiff_t>(begin));
      begin = end;
    }
    if (ambiguous && refinement < options.max_refinements) {
      h *= 0.5;
      continue;
    }
    if (failure.status == TrackOutcome::Status::kAmbiguous) {
      throw TrackingAmbiguity(failure.what, failure.index);
    }
    if (failure.status == TrackOutcome::Status::kLost) {
      throw TrackingLost(failure.what, failure.index);
    }
    if (refinement > 0) {
      out.notes.push_back("step halved " + std::to_string(refinement) +
                          " time(s) to resolve a tracking ambiguity");
    }
    if (!singular_segments.empty()) {
      out.reflect_back = reflect_check(g, metric, singular_segments.front(), 0.25 * h);
      out.notes.push_back(
          "continuation restarted past the singular crossing; crossing direction "
          "is not constrained");
    }
    break;
  }
  out.goal_error = metric.distance(out.tracked.back(), goal);
  out.reached = out.goal_error <= options.goal_tolerance;
  return out;
}

void require_class(const WorkspaceAtlas& atlas, const Pose& start, const Pose& goal,
                   PlanClass wanted) {
  const PlanClass got = classify(atlas, start, goal);
  if (got != wanted) {
    throw Error("query is " + std::string(plan_class_name(got)) + ", expected " +
                std::string(plan_class_name(wanted)));
  }
}

}  // namespace

std::string_view plan_class_name(PlanClass c) {
  switch (c) {
    case PlanClass::kSameDomain:
      return "SAME_DOMAIN";
    case PlanClass::kSameAspectDifferentDomain:
      return "SAME_ASPECT_DIFFERENT_DOMAIN";
    case PlanClass::kDifferentAspects:
      return "DIFFERENT_ASPECTS";
    case PlanClass::kUnreachableOrDisconnected:
      return "UNREACHABLE_OR_DISCONNECTED";
  }
  return "?";
}

int PlanResult::characteristic_crossings() const {
  return static_cast<int>(std::count_if(crossings.begin(), crossings.end(), [](const auto& c) {
    return c.kind == Crossing::Kind::kCharacteristic;
  }));
}

int PlanResult::singular_crossings() const {
  return static_cast<int>(std::count_if(crossings.begin(), crossings.end(), [](const auto& c) {
    return c.kind == Crossing::Kind::kSingular;
  }));
}

PlanClass classify(const WorkspaceAtlas& atlas, const Pose& start, const Pose& goal) {
  std::optional<Location> ends[2];
  const Pose* poses[2] = {&start, &goal};
  for (int k = 0; k < 2; ++k) {
    try {
      ends[k] = locate(atlas, *poses[k]);
    } catch (const OutOfBox&) {
      return PlanClass::kUnreachableOrDisconnected;
    }
    if (!ends[k]->reachable && !ends[k]->boundary) {
      return PlanClass::kUnreachableOrDisconnected;
    }
  }
  for (int k = 0; k < 2; ++k) {
    const Location& l = *ends[k];
    const char* which = k == 0 ? "start" : "goal";
    if (l.boundary) {
      throw BoundaryAmbiguity(std::string(which) +
                              " pose lies on the joint-limit boundary layer; perturb it");
    }
    if (l.singular) {
      throw BoundaryAmbiguity(std::string(which) +
                              " pose lies in the singular layer; perturb it");
    }
    if (l.char_surface) {
      throw BoundaryAmbiguity(std::string(which) +
                              " pose lies on a characteristic layer; perturb it");
    }
    if (!l.domain) {
      throw BoundaryAmbiguity(std::string(which) +
                              " pose lies in a fragment without a uniqueness domain");
    }
  }
  const Location& a = *ends[0];
  const Location& b = *ends[1];
  if (a.component != b.component) return PlanClass::kUnreachableOrDisconnected;
  if (a.aspect != b.aspect) return PlanClass::kDifferentAspects;
  if (a.domain != b.domain) return PlanClass::kSameAspectDifferentDomain;
  return PlanClass::kSameDomain;
}

double center_distance(const WorkspaceAtlas& atlas, std::size_t a, std::size_t b) {
  static thread_local PoseMetric metric;
  metric = PoseMetric::for_geometry(atlas.geometry);
  return metric.distance(atlas.center_pose(a), atlas.center_pose(b));
}

std::optional<std::vector<std::size_t>> astar(const WorkspaceAtlas& atlas,
                                              std::size_t start, std::size_t goal,
                                              const LeafFilter& passable,
                                              const EdgeCost& cost) {
  const RegionOctree& tree = atlas.tree;
  const PoseMetric metric = PoseMetric::for_geometry(atlas.geometry);
  const std::size_t n = tree.leaf_count();
  std::vector<Pose> centers(n);
  std::vector<bool> have_center(n, false);
  auto center = [&](std::size_t i) -> const Pose& {
    if (!have_center[i]) {
      centers[i] = atlas.center_pose(i);
      have_center[i] = true;
    }
    return centers[i];
  };
  auto edge = [&](std::size_t a, std::size_t b) {
    return cost ? cost(a, b) : metric.distance(center(a), center(b));
  };
  auto heuristic = [&](std::size_t i) { return metric.distance(center(i), center(goal)); };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> g_cost(n, kInf);
  std::vector<std::size_t> parent(n, n);
  std::vector<bool> closed(n, false);
  using Entry = std::pair<double, std::size_t>;  // f, leaf; ties by leaf index
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  g_cost[start] = 0.0;
  open.emplace(heuristic(start), start);
  std::vector<std::size_t> nb;
  while (!open.empty()) {
    const auto [f, u] = open.top();
    open.pop();
    if (closed[u]) continue;
    closed[u] = true;
    if (u == goal) break;
    nb = tree.neighbors(u);
    for (std::size_t v : nb) {
      if (closed[v] || !passable(v)) continue;
      const double c = g_cost[u] + edge(u, v);
      if (c < g_cost[v]) {
        g_cost[v] = c;
        parent[v] = u;
        open.emplace(c + heuristic(v), v);
      }
    }
  }
  if (!closed[goal]) return std::nullopt;
  std::vector<std::size_t> path;
  for (std::size_t v = goal; v != n; v = parent[v]) {
    path.push_back(v);
    if (v == start) break;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

double default_step(const WorkspaceAtlas& atlas) {
  const Eigen::Vector3d leaf = atlas.tree.box().extent() / std::ldexp(1.0, atlas.max_depth());
  return 0.5 * metric_length(PoseMetric::for_geometry(atlas.geometry), leaf);
}

PlanResult plan_same_domain(const WorkspaceAtlas& atlas, const Pose& start,
                            const Pose& goal, const PlannerOptions& options) {
  require_class(atlas, start, goal, PlanClass::kSameDomain);
  return build_plan(atlas, start, goal, PlanClass::kSameDomain, Mode::kSameDomain, options);
}

PlanResult plan_nonsingular_mode_change(const WorkspaceAtlas& atlas, const Pose& start,
                                        const Pose& goal, const PlannerOptions& options) {
  require_class(atlas, start, goal, PlanClass::kSameAspectDifferentDomain);
  return build_plan(atlas, start, goal, PlanClass::kSameAspectDifferentDomain,
                    Mode::kNonsingular, options);
}

PlanResult plan_singular_crossing(const WorkspaceAtlas& atlas, const Pose& start,
                                  const Pose& goal, const PlannerOptions& options) {
  require_class(atlas, start, goal, PlanClass::kDifferentAspects);
  return build_plan(atlas, start, goal, PlanClass::kDifferentAspects, Mode::kSingular,
                    options);
}

PlanResult plan(const WorkspaceAtlas& atlas, const Pose& start, const Pose& goal,
                const PlannerOptions& options) {
  const PlanClass cls = classify(atlas, start, goal);
  switch (cls) {
    case PlanClass::kSameDomain:
      return build_plan(atlas, start, goal, cls, Mode::kSameDomain, options);
    case PlanClass::kSameAspectDifferentDomain:
      return build_plan(atlas, start, goal, cls, Mode::kNonsingular, options);
    case PlanClass::kDifferentAspects:
      return build_plan(atlas, start, goal, cls, Mode::kSingular, options);
    case PlanClass::kUnreachableOrDisconnected:
      break;
  }
  PlanResult out;
  out.plan_class = cls;
  out.start = start;
  out.goal = goal;
  out.notes.push_back("an end pose is unreachable or in another connected component");
  return out;
}

std::vector<Pose> track_assembly_mode(const ManipulatorGeometry& g,
                                      const std::vector<JointVector>& joints,
                                      const Pose& initial, double step,
                                      const DKOptions& options) {
  if (joints.empty()) return {};
  const DirectKinematicsSolver solver(g, options);
  TrackOutcome t = track(solver, PoseMetric::for_geometry(g), joints, 0, joints.size(),
                         initial, step);
  switch (t.status) {
    case TrackOutcome::Status::kOk:
      break;
    case TrackOutcome::Status::kLost:
      throw TrackingLost(t.what, t.index);
    case TrackOutcome::Status::kAmbiguous:
      throw TrackingAmbiguity(t.what, t.index);
  }
  return t.poses;
}

NaiveResult naive_joint_interpolation(const ManipulatorGeometry& g, const Pose& start,
                                      const Pose& goal, double step,
                                      const PlannerOptions& options) {
  const DirectKinematicsSolver solver(g, options.dk);
  const PoseMetric metric = PoseMetric::for_geometry(g);
  const JointVector q0 = inverse_kinematics(g, start);
  const JointVector q1 = inverse_kinematics(g, goal);
  NaiveResult out;
  double h = step;
  for (int refinement = 0;; ++refinement) {
    const int n = std::max(2, static_cast<int>(std::ceil((q1 - q0).norm() / (0.5 * h))));
    out.joint_trajectory.clear();
    for (int i = 0; i <= n; ++i) {
      const double t = static_cast<double>(i) / n;
      out.joint_trajectory.push_back((1.0 - t) * q0 + t * q1);
    }
    TrackOutcome t = track(solver, metric, out.joint_trajectory, 0,
                           out.joint_trajectory.size(), start, h);
    if (t.status == TrackOutcome::Status::kAmbiguous && refinement < options.max_refinements) {
      h *= 0.5;
      continue;
    }
    out.tracked = std::move(t.poses);
    out.completed = t.status == TrackOutcome::Status::kOk;
    out.stop_reason = out.completed ? "completed" : t.what;
    break;
  }
  out.goal_error = out.tracked.empty() ? std::numeric_limits<double>::infinity()
                                       : metric.distance(out.tracked.back(), goal);
  return out;
}

void write_trajectory(const ManipulatorGeometry& g, const PlanResult& plan,
                      const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "w"),
                                                       &std::fclose);
  if (!file) throw IoError("cannot open " + path + " for writing");
  std::FILE* f = file.get();
  std::fputs("# pkatlas-trajectory v1\n", f);
  std::fprintf(f, "# start %.12g %.12g %.12g\n", plan.start.x, plan.start.y, plan.start.phi);
  std::fprintf(f, "# goal %.12g %.12g %.12g\n", plan.goal.x, plan.goal.y, plan.goal.phi);
  std::fprintf(f, "# class %s\n", std::string(plan_class_name(plan.plan_class)).c_str());
  std::fputs("# crossings", f);
  for (const Crossing& c : plan.crossings) {
    std::fprintf(f, " %s:%zu",
                 c.kind == Crossing::Kind::kSingular ? "singular" : "characteristic",
                 c.index);
  }
  std::fputc('\n', f);
  std::fputs("# index x y phi rho1 rho2 rho3 detA flag\n", f);
  std::vector<char> flags(plan.workspace_path.size(), '-');
  for (const Crossing& c : plan.crossings) {
    flags[c.index] = c.kind == Crossing::Kind::kSingular ? 'S' : 'C';
  }
  for (std::size_t i = 0; i < plan.workspace_path.size(); ++i) {
    const Pose& p = plan.workspace_path[i];
    const JointVector& q = plan.joint_trajectory[i];
    std::fprintf(f, "%zu %.12g %.12g %.12g %.12g %.12g %.12g %.12g %c\n", i, p.x, p.y,
                 p.phi, q[0], q[1], q[2], det_A(g, p), flags[i]);
  }
  if (std::ferror(f)) throw IoError("write failed: " + path);
}

}  // namespace pkatlas
