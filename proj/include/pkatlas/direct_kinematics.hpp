#ifndef PKATLAS_DIRECT_KINEMATICS_HPP
#define PKATLAS_DIRECT_KINEMATICS_HPP

#include <array>
#include <vector>

#include "pkatlas/kinematics.hpp"

namespace pkatlas {

struct DKSolutionSet {
  std::vector<Pose> poses;       // sorted by phi
  std::vector<double> residuals;  // max_i | |B_i - A_i| - rho_i |

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
};

struct DKOptions {
  int phi_samples = 2048;
  double phi_tolerance = 1e-12;
  double residual_tolerance = 1e-9;
  double dedup_distance = 1e-7;
};

/// All-solution direct kinematics by a branch-residual scan over phi.
///
/// For each phi, B1 lies on circle(A1, rho1) and on circle(A2 - R(phi) b2,
/// rho2); the (up to) two intersections form the + and - branches. A root is
/// a zero of |B3 - A3| - rho3 along a branch. Where the circles stop
/// intersecting, the two branches join at a tangency and the scan closes the
/// loop through that point, so sign changes come in pairs. Intervals next to
/// a tangency are resampled evenly in the half chord, and a branch extremum
/// close to zero is searched for a root pair hidden between two samples.
///
/// Holds the trigonometric table; reuse one solver for many queries.
class DirectKinematicsSolver {
 public:
  explicit DirectKinematicsSolver(const ManipulatorGeometry& g,
                                  DKOptions options = {});

  /// Full solve: bracket, bisect, Newton-polish, deduplicate.
  DKSolutionSet solve(const JointVector& q) const;

  /// Number of bracketed roots without bisection or polishing. Agrees with
  /// solve() unless polishing fails at a near double root.
  int count(const JointVector& q) const;

  const ManipulatorGeometry& geometry() const { return geometry_; }
  const DKOptions& options() const { return options_; }

 private:
  struct Bracket {
    double lo, hi;  // phi interval; the branch is defined throughout
    int branch;     // +1 or -1
  };

  void scan(const JointVector& q, std::vector<Bracket>* brackets,
            int* count) const;

  ManipulatorGeometry geometry_;
  DKOptions options_;
  PoseMetric metric_;
  // Per-sample orientation terms: unit (x, y), distance, offset (x, y),
  // 1 / (2 distance).
  std::vector<std::array<double, 6>> table_;
};

/// Convenience wrapper building a solver per call.
DKSolutionSet direct_kinematics(const ManipulatorGeometry& g,
                                const JointVector& q, DKOptions options = {});

/// Residual of the loop-closure equations at a pose.
double closure_residual(const ManipulatorGeometry& g, const Pose& p,
                        const JointVector& q);

}  // namespace pkatlas

#endif  // PKATLAS_DIRECT_KINEMATICS_HPP
