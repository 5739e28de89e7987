#include "pkatlas/archive.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pkatlas/config.hpp"
#include "pkatlas/error.hpp"

namespace pkatlas {

namespace {

using nlohmann::json;

json components_json(const std::vector<ComponentInfo>& infos) {
  json out = json::array();
  for (const auto& c : infos) {
    out.push_back({{"id", c.id},
                   {"aspect", c.aspect},
                   {"volume", c.volume},
                   {"artifact", c.artifact},
                   {"det_sign", c.det_sign},
                   {"joint_region", c.joint_region},
                   {"dk_count", c.dk_count},
                   {"samples", c.samples}});
  }
  return out;
}

std::vector<ComponentInfo> components_from(const json& j) {
  std::vector<ComponentInfo> out;
  for (const auto& c : j) {
    ComponentInfo info;
    info.id = c.at("id").get<int>();
    info.aspect = c.at("aspect").get<int>();
    info.volume = c.at("volume").get<double>();
    info.artifact = c.at("artifact").get<bool>();
    info.det_sign = c.at("det_sign").get<int>();
    info.joint_region = c.at("joint_region").get<int>();
    info.dk_count = c.at("dk_count").get<int>();
    info.samples = c.at("samples").get<int>();
    out.push_back(info);
  }
  return out;
}

int count_artifacts(const std::vector<ComponentInfo>& infos) {
  return static_cast<int>(std::count_if(infos.begin(), infos.end(),
                                        [](const auto& c) { return c.artifact; }));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

double attribute(const Attributes& attrs, const char* name, double fallback) {
  for (const auto& [key, value] : attrs) {
    if (key == name) return value;
  }
  return fallback;
}

}  // namespace

std::string summary_json(const Analysis& analysis) {
  const WorkspaceAtlas& ws = analysis.workspace;
  const JointAtlas& ja = analysis.joint;
  json j;
  j["format"] = "pkatlas-summary v1";
  j["workspace_depth"] = ws.max_depth();
  j["joint_depth"] = ja.tree.max_depth();
  j["low_depth_counts_unreliable"] =
      ws.max_depth() < kReliableDepth || ja.tree.max_depth() < kReliableDepth;
  j["options"] = {{"coarse_levels", ws.options.coarse_levels},
                  {"volume_floor", ws.options.volume_floor},
                  {"image_mismatch_fraction", ws.options.image_mismatch_fraction},
                  {"adjacency_contacts", ws.options.adjacency_contacts},
                  {"association_fraction", ws.options.association_fraction}};
  j["workspace_leaves"] = ws.tree.leaf_count();
  j["joint_leaves"] = ja.tree.leaf_count();
  j["reachable_volume"] = ws.reachable_volume;

  j["aspect_count"] = ws.major_aspect_count();
  j["aspect_artifacts"] = count_artifacts(ws.aspects);
  json per_aspect = json::array();
  for (const auto& a : ws.aspects) {
    if (a.artifact) continue;
    per_aspect.push_back({{"aspect", a.id},
                          {"volume", a.volume},
                          {"det_sign", a.det_sign},
                          {"domains", ws.major_domain_count(a.id)}});
  }
  j["aspects_major"] = per_aspect;
  j["basic_region_artifacts"] = count_artifacts(ws.basic_regions);
  j["domain_artifacts"] = count_artifacts(ws.domains);
  j["ambiguous_groupings"] = ws.ambiguous_groupings;

  std::map<int, int> by_count;
  for (const auto& r : ja.regions) {
    if (!r.artifact) ++by_count[r.dk_count];
  }
  json tally = json::object();
  for (const auto& [count, n] : by_count) tally[std::to_string(count)] = n;
  j["joint_regions_by_count"] = tally;
  j["joint_region_artifacts"] = count_artifacts(ja.regions);

  json rows = json::array();
  for (const auto& row : analysis.table.rows) {
    rows.push_back({{"aspect", row.aspect},
                    {"joint_region", row.joint_region},
                    {"basic_regions", row.basic_regions},
                    {"modes", row.modes}});
  }
  j["association"] = rows;
  json pairs = json::array();
  for (const auto& [pair, n] : analysis.table.witnesses) {
    pairs.push_back({pair.first, pair.second, n,
                     analysis.table.associated(pair.first, pair.second)});
  }
  j["association_witnesses"] = pairs;

  j["components"] = components_json(ws.components);
  j["aspects"] = components_json(ws.aspects);
  j["basic_regions"] = components_json(ws.basic_regions);
  j["domains"] = components_json(ws.domains);
  j["joint_regions"] = components_json(ja.regions);
  return j.dump(2) + "\n";
}

void write_archive(const Analysis& analysis, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  const fs::path root(dir);
  const WorkspaceAtlas& ws = analysis.workspace;
  const JointAtlas& ja = analysis.joint;

  write_file(root / "geometry.json", geometry_to_json(ws.geometry));
  export_voxels(
      ws.tree,
      [&](std::size_t i) {
        const WorkspaceLeaf& l = ws.leaves[i];
        Attributes a;
        if (ws.tree.cell_class(i) == CellClass::kEmpty) return a;
        a = {{"sing", l.singular ? 1 : 0},
             {"char", l.char_surface ? 1 : 0},
             {"comp", l.component},
             {"aspect", l.aspect},
             {"basic", l.basic_region},
             {"domain", l.domain},
             {"image", l.image_region}};
        return a;
      },
      (root / "workspace.voxels").string());
  export_voxels(
      ja.tree,
      [&](std::size_t i) {
        const JointLeaf& l = ja.leaves[i];
        return Attributes{{"count", l.dk_count},
                          {"sing", l.singular_image ? 1 : 0},
                          {"region", l.joint_region}};
      },
      (root / "joint.voxels").string());
  write_file(root / "atlas-summary", summary_json(analysis));
}

Analysis read_archive(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw IoError("no atlas archive at " + dir);
  Analysis out;
  const ManipulatorGeometry g = parse_geometry(read_file(root / "geometry.json"));

  json s;
  try {
    s = json::parse(read_file(root / "atlas-summary"));
  } catch (const json::exception& e) {
    throw IoError(std::string("atlas-summary unreadable: ") + e.what());
  }
  try {
    AtlasOptions options;
    const json& o = s.at("options");
    options.coarse_levels = o.at("coarse_levels").get<int>();
    options.volume_floor = o.at("volume_floor").get<double>();
    options.image_mismatch_fraction = o.at("image_mismatch_fraction").get<double>();
    options.adjacency_contacts = o.at("adjacency_contacts").get<int>();
    options.association_fraction = o.at("association_fraction").get<double>();

    WorkspaceAtlas& ws = out.workspace;
    ws.geometry = g;
    ws.options = options;
    ws.reachable_volume = s.at("reachable_volume").get<double>();
    ws.ambiguous_groupings = s.at("ambiguous_groupings").get<int>();
    ws.components = components_from(s.at("components"));
    ws.aspects = components_from(s.at("aspects"));
    ws.basic_regions = components_from(s.at("basic_regions"));
    ws.domains = components_from(s.at("domains"));

    VoxelImport wv = import_voxels((root / "workspace.voxels").string(), pose_box(g),
                                   s.at("workspace_depth").get<int>());
    ws.tree = std::move(wv.tree);
    ws.leaves.assign(ws.tree.leaf_count(), WorkspaceLeaf{});
    for (std::size_t i = 0; i < ws.leaves.size(); ++i) {
      const Attributes& a = wv.attributes[i];
      WorkspaceLeaf& l = ws.leaves[i];
      l.reachable = ws.tree.cell_class(i) == CellClass::kFull;
      l.boundary = ws.tree.cell_class(i) == CellClass::kMixed;
      l.singular = attribute(a, "sing", 0) != 0;
      l.char_surface = attribute(a, "char", 0) != 0;
      l.component = static_cast<int>(attribute(a, "comp", -1));
      l.aspect = static_cast<int>(attribute(a, "aspect", -1));
      l.basic_region = static_cast<int>(attribute(a, "basic", -1));
      l.domain = static_cast<int>(attribute(a, "domain", -1));
      l.image_region = static_cast<int>(attribute(a, "image", -1));
    }

    JointAtlas& ja = out.joint;
    ja.geometry = g;
    ja.options = options;
    ja.regions = components_from(s.at("joint_regions"));
    VoxelImport jv = import_voxels((root / "joint.voxels").string(), joint_box(g),
                                   s.at("joint_depth").get<int>());
    ja.tree = std::move(jv.tree);
    ja.leaves.assign(ja.tree.leaf_count(), JointLeaf{});
    for (std::size_t i = 0; i < ja.leaves.size(); ++i) {
      const Attributes& a = jv.attributes[i];
      ja.leaves[i].dk_count = static_cast<int>(attribute(a, "count", 0));
      ja.leaves[i].singular_image = attribute(a, "sing", 0) != 0;
      ja.leaves[i].joint_region = static_cast<int>(attribute(a, "region", -1));
    }

    for (const auto& r : s.at("association")) {
      AssociationRow row;
      row.aspect = r.at("aspect").get<int>();
      row.joint_region = r.at("joint_region").get<int>();
      row.basic_regions = r.at("basic_regions").get<std::vector<int>>();
      row.modes = r.at("modes").get<int>();
      out.table.rows.push_back(std::move(row));
    }
    for (const auto& w : s.at("association_witnesses")) {
      const std::pair<int, int> pair(w.at(0).get<int>(), w.at(1).get<int>());
      out.table.witnesses[pair] = w.at(2).get<int>();
      if (w.at(3).get<bool>()) out.table.associated_pairs.insert(pair);
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("atlas-summary malformed: ") + e.what());
  }
  return out;
}

}  // namespace pkatlas
