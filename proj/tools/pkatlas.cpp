// pkatlas: workspace atlas, point queries, planning and fixtures for the
// planar 3-RPR manipulator.
//
// Exit codes: 0 success, 2 invalid input, 3 unreachable or disconnected
// query, 4 internal tolerance failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pkatlas/archive.hpp"
#include "pkatlas/config.hpp"
#include "pkatlas/error.hpp"
#include "pkatlas/fixtures.hpp"
#include "pkatlas/planner.hpp"

namespace {

using namespace pkatlas;

constexpr int kOk = 0;
constexpr int kInvalidInput = 2;
constexpr int kUnreachable = 3;
constexpr int kToleranceFailure = 4;

struct RunConfig {
  std::string geometry_path;
  int depth = 7;
  int joint_depth = -1;  // follows depth
  std::string out = "atlas";
  std::uint64_t seed = 1;
  std::vector<std::string> pose_args;
  std::string trajectory_path;
  std::string fixture_path;
  double volume_floor = AtlasOptions{}.volume_floor;
  double step = 0.0;
};

double parse_number(const std::string& text, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw ConfigError(std::string("bad ") + what + ": '" + text + "'");
  }
  return v;
}

// Radians, or degrees with a "deg" or "d" suffix.
double parse_angle(std::string text) {
  for (const char* suffix : {"deg", "d"}) {
    const std::string s(suffix);
    if (text.size() > s.size() && text.compare(text.size() - s.size(), s.size(), s) == 0) {
      text.resize(text.size() - s.size());
      return parse_number(text, "angle") * std::numbers::pi / 180.0;
    }
  }
  return parse_number(text, "angle");
}

std::vector<Pose> parse_poses(const std::vector<std::string>& args, std::size_t wanted) {
  if (args.size() != 3 * wanted) {
    throw ConfigError("expected " + std::to_string(wanted) + " --pose x y phi");
  }
  std::vector<Pose> out;
  for (std::size_t i = 0; i < wanted; ++i) {
    out.emplace_back(parse_number(args[3 * i], "x"), parse_number(args[3 * i + 1], "y"),
                     parse_angle(args[3 * i + 2]));
  }
  return out;
}

ManipulatorGeometry geometry_of(const RunConfig& c) {
  return c.geometry_path.empty() ? default_geometry() : load_geometry(c.geometry_path);
}

const char* yes_no(bool b) { return b ? "yes" : "no"; }

std::string id_or_dash(const std::optional<int>& v) {
  return v ? std::to_string(*v) : std::string("-");
}

int cmd_analyze(const RunConfig& c) {
  const ManipulatorGeometry g = geometry_of(c);
  AtlasOptions options;
  options.volume_floor = c.volume_floor;
  const int joint_depth = c.joint_depth < 0 ? c.depth : c.joint_depth;
  const Analysis an = analyze(g, c.depth, joint_depth, options);
  write_archive(an, c.out);

  const WorkspaceAtlas& ws = an.workspace;
  std::printf("workspace_depth %d\njoint_depth %d\n", c.depth, joint_depth);
  if (std::min(c.depth, joint_depth) < kReliableDepth) {
    std::printf("warning low-depth, counts unreliable\n");
  }
  std::printf("workspace_leaves %zu\nreachable_volume %.6g\n", ws.tree.leaf_count(),
              ws.reachable_volume);
  const int majors = ws.major_aspect_count();
  std::printf("aspects %d (artifacts %zu)\n", majors, ws.aspects.size() - majors);
  for (int a = 0; a < majors; ++a) {
    std::printf("aspect %d sign %+d volume %.6g domains %d\n", a, ws.aspects[a].det_sign,
                ws.aspects[a].volume, ws.major_domain_count(a));
  }
  for (const ComponentInfo& r : an.joint.regions) {
    if (!r.artifact) {
      std::printf("joint_region %d count %d volume %.6g\n", r.id, r.dk_count, r.volume);
    }
  }
  for (const AssociationRow& row : an.table.rows) {
    std::printf("association aspect %d joint_region %d modes %d regions", row.aspect,
                row.joint_region, row.modes);
    for (int b : row.basic_regions) std::printf(" %d", b);
    std::printf("\n");
  }
  if (ws.ambiguous_groupings > 0) {
    std::printf("note %d aspect(s) admit more than one domain grouping\n",
                ws.ambiguous_groupings);
  }
  std::printf("archive %s\n", c.out.c_str());
  return kOk;
}

int cmd_locate(const RunConfig& c) {
  const Pose p = parse_poses(c.pose_args, 1)[0];
  const Analysis an = read_archive(c.out);
  std::printf("pose %.9g %.9g %.9g\n", p.x, p.y, p.phi);
  Location loc;
  try {
    loc = locate(an.workspace, p);
  } catch (const OutOfBox&) {
    std::printf("reachable no (outside the workspace box)\n");
    return kUnreachable;
  }
  std::printf("leaf %zu\n", loc.leaf);
  std::printf("reachable %s\n", loc.boundary ? "boundary" : yes_no(loc.reachable));
  std::printf("singular %s\ncharacteristic %s\n", yes_no(loc.singular),
              yes_no(loc.char_surface));
  std::printf("component %s\n",
              loc.component >= 0 ? std::to_string(loc.component).c_str() : "-");
  std::printf("aspect %s\nbasic_region %s\ndomain %s\n", id_or_dash(loc.aspect).c_str(),
              id_or_dash(loc.basic_region).c_str(), id_or_dash(loc.domain).c_str());
  if (loc.reachable) {
    std::printf("det_A %.9g\n", det_A(an.workspace.geometry, p));
  }
  return loc.reachable || loc.boundary ? kOk : kUnreachable;
}

int cmd_plan(const RunConfig& c) {
  const std::vector<Pose> poses = parse_poses(c.pose_args, 2);
  const Analysis an = read_archive(c.out);
  PlannerOptions options;
  options.step = c.step;
  const PlanResult r = plan(an.workspace, poses[0], poses[1], options);
  std::printf("class %s\n", std::string(plan_class_name(r.plan_class)).c_str());
  if (r.plan_class == PlanClass::kUnreachableOrDisconnected) return kUnreachable;

  const std::string path = c.trajectory_path.empty()
                               ? (std::filesystem::path(c.out) / "trajectory.txt").string()
                               : c.trajectory_path;
  write_trajectory(an.workspace.geometry, r, path);
  std::printf("characteristic_crossings %d\nsingular_crossings %d\n",
              r.characteristic_crossings(), r.singular_crossings());
  for (const Crossing& x : r.crossings) {
    std::printf("crossing %s index %zu pose %.9g %.9g %.9g det_A %.3g\n",
                x.kind == Crossing::Kind::kSingular ? "singular" : "characteristic", x.index,
                x.pose.x, x.pose.y, x.pose.phi, x.det);
  }
  if (r.reflect_back) {
    std::printf("reflect_back %s ratio %.6g\n", yes_no(r.reflect_back->detected),
                r.reflect_back->quadratic_ratio);
  }
  std::printf("samples %zu\nstep %.6g\ngoal_error %.3g\n", r.workspace_path.size(), r.step,
              r.goal_error);
  for (const std::string& n : r.notes) std::printf("note %s\n", n.c_str());
  std::printf("trajectory %s\n", path.c_str());
  if (!r.reached) {
    std::fprintf(stderr, "pkatlas: tracked end pose misses the goal by %.3g\n",
                 r.goal_error);
    return kToleranceFailure;
  }
  return kOk;
}

int cmd_fixtures(const RunConfig& c) {
  const Analysis an = read_archive(c.out);
  const Fixture f = find_fixture(an.workspace, an.joint, c.seed);
  const std::string text = fixture_to_json(f);
  const std::string path = c.fixture_path.empty()
                               ? (std::filesystem::path(c.out) / "fixture.json").string()
                               : c.fixture_path;
  std::ofstream out(path, std::ios::binary);
  if (!(out << text)) throw IoError("cannot write " + path);
  std::fputs(text.c_str(), stdout);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Workspace atlas and trajectory planning for the planar 3-RPR manipulator"};
  app.require_subcommand(1);
  RunConfig c;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out,--atlas", c.out, "Atlas archive directory");
  };
  auto geometry_opts = [&](CLI::App* sub) {
    sub->add_option("--geometry", c.geometry_path, "Geometry JSON (default: built-in)");
  };
  auto pose_opt = [&](CLI::App* sub, const char* help) {
    sub->add_option("--pose", c.pose_args, help)
        ->expected(3)
        ->allow_extra_args(false)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  };

  CLI::App* analyze_cmd = app.add_subcommand("analyze", "Build and archive the atlas");
  geometry_opts(analyze_cmd);
  common(analyze_cmd);
  analyze_cmd->add_option("--depth", c.depth, "Workspace octree depth")
      ->check(CLI::Range(1, kMaxOctreeDepth));
  analyze_cmd->add_option("--joint-depth", c.joint_depth, "Joint octree depth (default: depth)")
      ->check(CLI::Range(1, kMaxOctreeDepth));
  analyze_cmd->add_option("--volume-floor", c.volume_floor,
                          "Artifact threshold as a fraction of the reference volume");

  CLI::App* locate_cmd = app.add_subcommand("locate", "Report the labels of one pose");
  common(locate_cmd);
  pose_opt(locate_cmd, "x y phi (phi in radians, or with a deg suffix)");

  CLI::App* plan_cmd = app.add_subcommand("plan", "Plan between two poses");
  common(plan_cmd);
  pose_opt(plan_cmd, "x y phi, given twice: start then goal");
  plan_cmd->add_option("--trajectory", c.trajectory_path,
                       "Trajectory export (default: <out>/trajectory.txt)");
  plan_cmd->add_option("--step", c.step, "Sampling step (default: half a leaf diagonal)");

  CLI::App* fixtures_cmd =
      app.add_subcommand("fixtures", "Find a joint vector with six assembly modes");
  common(fixtures_cmd);
  fixtures_cmd->add_option("--seed", c.seed, "Search order seed");
  fixtures_cmd->add_option("--fixture", c.fixture_path,
                           "Fixture file (default: <out>/fixture.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalidInput;
  }

  try {
    if (analyze_cmd->parsed()) return cmd_analyze(c);
    if (locate_cmd->parsed()) return cmd_locate(c);
    if (plan_cmd->parsed()) return cmd_plan(c);
    return cmd_fixtures(c);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "pkatlas: invalid input: %s\n", e.what());
    return kInvalidInput;
  } catch (const IoError& e) {
    std::fprintf(stderr, "pkatlas: %s\n", e.what());
    return kInvalidInput;
  } catch (const DegenerateTriangle& e) {
    std::fprintf(stderr, "pkatlas: invalid geometry: %s\n", e.what());
    return kInvalidInput;
  } catch (const DepthOutOfRange& e) {
    std::fprintf(stderr, "pkatlas: %s\n", e.what());
    return kInvalidInput;
  } catch (const BoundaryAmbiguity& e) {
    std::fprintf(stderr, "pkatlas: %s (move the pose by about one leaf width)\n", e.what());
    return kInvalidInput;
  } catch (const Error& e) {
    std::fprintf(stderr, "pkatlas: %s\n", e.what());
    return kToleranceFailure;
  }
}
