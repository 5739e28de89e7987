#include "pkatlas/kinematics.hpp"

#include <algorithm>
#include <string>

namespace pkatlas {

namespace {

bool strict_triangle(double a, double b, double c) {
  return a > 0 && b > 0 && c > 0 && a + b > c && b + c > a && c + a > b;
}

double cross(const PlanarPoint& a, const PlanarPoint& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace

std::array<PlanarPoint, 3> platform_local_from_edges(double l12, double l23,
                                                     double l31) {
  if (!strict_triangle(l12, l23, l31)) {
    throw DegenerateTriangle("platform edges " + std::to_string(l12) + ", " +
                             std::to_string(l23) + ", " + std::to_string(l31) +
                             " do not form a proper triangle");
  }
  const double x = (l31 * l31 + l12 * l12 - l23 * l23) / (2.0 * l12);
  const double y = std::sqrt(l31 * l31 - x * x);
  return {PlanarPoint(0.0, 0.0), PlanarPoint(l12, 0.0), PlanarPoint(x, y)};
}

ManipulatorGeometry make_geometry(const std::array<PlanarPoint, 3>& base,
                                  double l12, double l23, double l31,
                                  double rho_min, double rho_max) {
  ManipulatorGeometry g;
  g.base = base;
  g.platform_local = platform_local_from_edges(l12, l23, l31);
  g.rho_min = rho_min;
  g.rho_max = rho_max;
  validate(g);
  return g;
}

void validate(const ManipulatorGeometry& g) {
  for (const auto& pts : {g.base, g.platform_local}) {
    for (const auto& pt : pts) {
      if (!pt.allFinite()) throw ConfigError("non-finite coordinate");
    }
  }
  const auto& b = g.platform_local;
  if (b[0].norm() != 0.0 || b[1].y() != 0.0 || !(b[1].x() > 0.0)) {
    throw ConfigError(
        "platform frame must have b1 = (0, 0) and b2 = (l12, 0) with l12 > 0");
  }
  const double l12 = (b[1] - b[0]).norm();
  const double l23 = (b[2] - b[1]).norm();
  const double l31 = (b[0] - b[2]).norm();
  if (!strict_triangle(l12, l23, l31) || b[2].y() == 0.0) {
    throw DegenerateTriangle("platform attachment points are collinear");
  }
  if (!(g.rho_min > 0.0) || !(g.rho_min < g.rho_max) ||
      !std::isfinite(g.rho_max)) {
    throw ConfigError("joint limits must satisfy 0 < rho_min < rho_max");
  }
}

ManipulatorGeometry default_geometry() {
  return make_geometry({PlanarPoint(0.0, 0.0), PlanarPoint(15.91, 0.0),
                        PlanarPoint(0.0, 10.0)},
                       17.04, 16.54, 20.84, 10.0, 32.0);
}

double platform_circumradius(const ManipulatorGeometry& g) {
  const auto& b = g.platform_local;
  const double a = (b[1] - b[0]).norm();
  const double c = (b[2] - b[1]).norm();
  const double d = (b[0] - b[2]).norm();
  const double area2 = std::abs(cross(b[1] - b[0], b[2] - b[0]));
  return a * c * d / (2.0 * area2);
}

Concurrency concurrency_point(const ManipulatorGeometry& g, const Pose& p,
                              double tolerance) {
  const auto b = attachment_points(g, p);
  std::array<PlanarPoint, 3> dir;
  for (int i = 0; i < 3; ++i) {
    const PlanarPoint leg = b[i] - g.base[i];
    const double rho = leg.norm();
    if (rho < epsilon_length(g)) throw CollapsedLeg("leg collapsed: zero length");
    dir[i] = leg / rho;
  }

  // Most transversal pair of lines.
  int best_i = 0, best_j = 1;
  double best_sin = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const double s = std::abs(cross(dir[i], dir[j]));
      if (s > best_sin) {
        best_sin = s;
        best_i = i;
        best_j = j;
      }
    }
  }
  Concurrency out;
  if (best_sin <= tolerance) {
    out.kind = Concurrency::Kind::kAtInfinity;
    return out;
  }
  const int k = 3 - best_i - best_j;

  // A_i + s u_i = A_j + t u_j
  const PlanarPoint delta = g.base[best_j] - g.base[best_i];
  const double denom = cross(dir[best_i], dir[best_j]);
  const double s = cross(delta, dir[best_j]) / denom;
  const PlanarPoint meet = g.base[best_i] + s * dir[best_i];

  const double offset = std::abs(cross(meet - g.base[k], dir[k]));
  if (offset * best_sin <= tolerance) {
    out.kind = Concurrency::Kind::kPoint;
    out.point = meet;
  }
  return out;
}

}  // namespace pkatlas
