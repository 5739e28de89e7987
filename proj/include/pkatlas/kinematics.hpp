#ifndef PKATLAS_KINEMATICS_HPP
#define PKATLAS_KINEMATICS_HPP

// Planar 3-RPR kinematics: geometry, closed-form inverse kinematics,
// velocity Jacobians and parallel-singularity tests.
//
// Pose convention: (x, y) is the world position of platform vertex B1 and
// phi is the direction of edge B1->B2, so B_i = (x, y) + R(phi) * b_i with
// b1 = (0, 0) and b2 = (l12, 0).

#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/LU>

#include "pkatlas/error.hpp"

namespace pkatlas {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;
using PlanarPoint = Point2<double>;

template <typename Scalar>
using JointVectorT = Eigen::Matrix<Scalar, 3, 1>;
using JointVector = JointVectorT<double>;

template <typename Scalar>
inline constexpr Scalar kTwoPi = Scalar(2) * std::numbers::pi_v<Scalar>;

/// Wraps an angle into [0, 2*pi).
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  using std::floor;
  Scalar w = a - kTwoPi<Scalar> * floor(a / kTwoPi<Scalar>);
  // floor() can leave w == 2*pi for tiny negative inputs.
  if (!(w < kTwoPi<Scalar>)) w = Scalar(0);
  return w;
}

/// Wraps an angle difference into (-pi, pi].
template <typename Scalar>
Scalar wrap_signed(Scalar a) {
  Scalar w = wrap_angle(a);
  if (w > std::numbers::pi_v<Scalar>) w -= kTwoPi<Scalar>;
  return w;
}

template <typename Scalar>
struct PoseT {
  Scalar x{0};
  Scalar y{0};
  Scalar phi{0};

  PoseT() = default;
  PoseT(Scalar px, Scalar py, Scalar angle)
      : x(px), y(py), phi(wrap_angle(angle)) {}

  Point2<Scalar> position() const { return {x, y}; }
  Eigen::Matrix<Scalar, 3, 1> vector() const { return {x, y, phi}; }
};
using Pose = PoseT<double>;

template <typename Scalar>
struct ManipulatorGeometryT {
  std::array<Point2<Scalar>, 3> base;            // A1, A2, A3
  std::array<Point2<Scalar>, 3> platform_local;  // b1, b2, b3
  Scalar rho_min{0};
  Scalar rho_max{0};
};
using ManipulatorGeometry = ManipulatorGeometryT<double>;

/// Platform triangle in its own frame from edge lengths |b1b2|, |b2b3|,
/// |b3b1|. b3 is placed on the positive-y side.
std::array<PlanarPoint, 3> platform_local_from_edges(double l12, double l23,
                                                     double l31);

ManipulatorGeometry make_geometry(const std::array<PlanarPoint, 3>& base,
                                  double l12, double l23, double l31,
                                  double rho_min, double rho_max);

/// Throws ConfigError / DegenerateTriangle when the geometry breaks its
/// invariants.
void validate(const ManipulatorGeometry& g);

/// A = (0,0), (15.91,0), (0,10); edges 17.04, 16.54, 20.84; 10 <= rho <= 32.
ManipulatorGeometry default_geometry();

double platform_circumradius(const ManipulatorGeometry& g);

/// Leg length under which a leg counts as collapsed.
inline double epsilon_length(const ManipulatorGeometry& g) {
  return 1e-9 * g.rho_max;
}

inline constexpr double kSingularityTolerance = 1e-9;

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> rotation(Scalar phi) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(phi), s = sin(phi);
  Eigen::Matrix<Scalar, 2, 2> r;
  r << c, -s, s, c;
  return r;
}

template <typename Scalar>
std::array<Point2<Scalar>, 3> attachment_points(
    const ManipulatorGeometryT<Scalar>& g, const PoseT<Scalar>& p) {
  const Eigen::Matrix<Scalar, 2, 2> r = rotation(p.phi);
  const Point2<Scalar> origin = p.position();
  // B1 is the reference point; keep it exact.
  return {origin, origin + r * g.platform_local[1],
          origin + r * g.platform_local[2]};
}

template <typename Scalar>
JointVectorT<Scalar> inverse_kinematics(const ManipulatorGeometryT<Scalar>& g,
                                        const PoseT<Scalar>& p) {
  const auto b = attachment_points(g, p);
  JointVectorT<Scalar> q;
  for (int i = 0; i < 3; ++i) q[i] = (b[i] - g.base[i]).norm();
  return q;
}

template <typename Scalar>
bool within_limits(const ManipulatorGeometryT<Scalar>& g,
                   const JointVectorT<Scalar>& q) {
  for (int i = 0; i < 3; ++i) {
    if (!(q[i] >= g.rho_min && q[i] <= g.rho_max)) return false;
  }
  return true;
}

/// Velocity model A t + B qdot = 0 with t = (xdot, ydot, phidot).
template <typename Scalar>
struct JacobianPairT {
  Eigen::Matrix<Scalar, 3, 3> A;
  Eigen::Matrix<Scalar, 3, 3> B;
};
using JacobianPair = JacobianPairT<double>;

template <typename Scalar>
JacobianPairT<Scalar> jacobians(const ManipulatorGeometryT<Scalar>& g,
                                const PoseT<Scalar>& p) {
  const auto b = attachment_points(g, p);
  JacobianPairT<Scalar> jp;
  const Scalar eps = Scalar(1e-9) * g.rho_max;
  for (int i = 0; i < 3; ++i) {
    const Point2<Scalar> leg = b[i] - g.base[i];
    const Scalar rho = leg.norm();
    if (rho < eps) throw CollapsedLeg("leg collapsed: zero length");
    const Point2<Scalar> u = leg / rho;
    const Point2<Scalar> r = b[i] - p.position();
    jp.A(i, 0) = u.x();
    jp.A(i, 1) = u.y();
    jp.A(i, 2) = r.x() * u.y() - r.y() * u.x();
  }
  jp.B = -Eigen::Matrix<Scalar, 3, 3>::Identity();
  return jp;
}

template <typename Scalar>
Scalar det_A(const ManipulatorGeometryT<Scalar>& g, const PoseT<Scalar>& p) {
  return jacobians(g, p).A.determinant();
}

/// Result of intersecting the three leg support lines.
struct Concurrency {
  enum class Kind { kNone, kPoint, kAtInfinity };
  Kind kind = Kind::kNone;
  PlanarPoint point = PlanarPoint::Zero();

  explicit operator bool() const { return kind != Kind::kNone; }
};

/// Geometric singularity oracle: intersects the most transversal pair of
/// leg lines and measures the third line's offset. The acceptance threshold
/// is matched to det(A): offset * |sin(pair angle)| <= tolerance.
Concurrency concurrency_point(const ManipulatorGeometry& g, const Pose& p,
                              double tolerance = kSingularityTolerance);

/// Distance on the (x, y, phi) torus with phi scaled to a length.
struct PoseMetric {
  double w_phi = 1.0;

  static PoseMetric for_geometry(const ManipulatorGeometry& g) {
    return PoseMetric{platform_circumradius(g)};
  }

  double distance(const Pose& a, const Pose& b) const {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dphi = w_phi * wrap_signed(a.phi - b.phi);
    return std::sqrt(dx * dx + dy * dy + dphi * dphi);
  }
};

}  // namespace pkatlas

#endif  // PKATLAS_KINEMATICS_HPP
