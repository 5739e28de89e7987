#include "pkatlas/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pkatlas/error.hpp"

namespace pkatlas {

namespace {

using nlohmann::json;

double number(const json& j, const char* what) {
  if (!j.is_number()) throw ConfigError(std::string(what) + " must be a number");
  return j.get<double>();
}

std::array<PlanarPoint, 3> points(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError(std::string(what) + " must hold 3 points");
  }
  std::array<PlanarPoint, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_array() || j[i].size() != 2) {
      throw ConfigError(std::string(what) + " points must be [x, y] pairs");
    }
    out[i] = PlanarPoint(number(j[i][0], what), number(j[i][1], what));
  }
  return out;
}

}  // namespace

ManipulatorGeometry parse_geometry(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("geometry is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("geometry must be a JSON object");
  for (const char* key : {"base", "rho_min", "rho_max"}) {
    if (!j.contains(key)) throw ConfigError(std::string("geometry lacks ") + key);
  }
  const bool edges = j.contains("platform_edges");
  const bool local = j.contains("platform_local");
  if (edges == local) {
    throw ConfigError("geometry needs exactly one of platform_edges, platform_local");
  }

  ManipulatorGeometry g;
  g.base = points(j["base"], "base");
  g.rho_min = number(j["rho_min"], "rho_min");
  g.rho_max = number(j["rho_max"], "rho_max");
  if (edges) {
    const json& e = j["platform_edges"];
    if (!e.is_array() || e.size() != 3) {
      throw ConfigError("platform_edges must hold 3 lengths");
    }
    try {
      g.platform_local = platform_local_from_edges(
          number(e[0], "platform_edges"), number(e[1], "platform_edges"),
          number(e[2], "platform_edges"));
    } catch (const DegenerateTriangle& err) {
      throw ConfigError(err.what());
    }
  } else {
    g.platform_local = points(j["platform_local"], "platform_local");
  }
  try {
    validate(g);
  } catch (const DegenerateTriangle& err) {
    throw ConfigError(err.what());
  }
  return g;
}

ManipulatorGeometry load_geometry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read geometry file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_geometry(text.str());
}

std::string geometry_to_json(const ManipulatorGeometry& g) {
  json j;
  auto pts = [](const std::array<PlanarPoint, 3>& p) {
    json a = json::array();
    for (const auto& v : p) a.push_back({v.x(), v.y()});
    return a;
  };
  j["base"] = pts(g.base);
  j["platform_local"] = pts(g.platform_local);
  j["rho_min"] = g.rho_min;
  j["rho_max"] = g.rho_max;
  return j.dump(2) + "\n";
}

}  // namespace pkatlas
