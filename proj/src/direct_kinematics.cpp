#include "pkatlas/direct_kinematics.hpp"

#include <algorithm>
#include <limits>

#include <Eigen/LU>

namespace pkatlas {

namespace {

struct BranchPair {
  double h2;        // squared half-chord; < 0 means the circles miss
  double g_plus;    // |B3 - A3|^2 - rho3^2 on the + branch
  double g_minus;   // same on the - branch
  PlanarPoint p_plus;
  PlanarPoint p_minus;
};

// Orientation-only part of the branch construction.
struct OrientationTerms {
  PlanarPoint unit;    // unit vector from A1 to the leg-2 circle center
  double dist;         // distance from A1 to that center
  PlanarPoint offset;  // R(phi) b3 + A1 - A3
};

OrientationTerms orientation_terms(const ManipulatorGeometry& g, double c,
                                   double s) {
  const PlanarPoint& b2 = g.platform_local[1];
  const PlanarPoint& b3 = g.platform_local[2];
  const PlanarPoint rb2(c * b2.x() - s * b2.y(), s * b2.x() + c * b2.y());
  const PlanarPoint rb3(c * b3.x() - s * b3.y(), s * b3.x() + c * b3.y());
  const PlanarPoint e = g.base[1] - rb2 - g.base[0];
  OrientationTerms t;
  t.dist = e.norm();
  t.unit = t.dist > 0.0 ? PlanarPoint(e / t.dist) : PlanarPoint::Zero();
  t.offset = rb3 + g.base[0] - g.base[2];
  return t;
}

// Evaluates both B1 candidates at one orientation. When clamp is set a
// slightly negative h2 (numerical noise at a tangency) is treated as zero.
BranchPair evaluate(const ManipulatorGeometry& g, const JointVector& q,
                    const OrientationTerms& t, bool clamp) {
  BranchPair out;
  if (t.dist <= 0.0) {
    out.h2 = -1.0;
    return out;
  }
  const double r1 = q[0] * q[0];
  const double a = (r1 - q[1] * q[1] + t.dist * t.dist) / (2.0 * t.dist);
  out.h2 = r1 - a * a;
  if (out.h2 < 0.0 && !clamp) return out;
  const double h = std::sqrt(std::max(out.h2, 0.0));
  const double ux = t.unit.x(), uy = t.unit.y();
  const double ax = a * ux, ay = a * uy;
  const double cx = -h * uy, cy = h * ux;
  const double r3 = q[2] * q[2];
  const double px = ax + cx + t.offset.x(), py = ay + cy + t.offset.y();
  const double mx = ax - cx + t.offset.x(), my = ay - cy + t.offset.y();
  out.g_plus = px * px + py * py - r3;
  out.g_minus = mx * mx + my * my - r3;
  out.p_plus = g.base[0] + PlanarPoint(ax + cx, ay + cy);
  out.p_minus = g.base[0] + PlanarPoint(ax - cx, ay - cy);
  return out;
}

BranchPair evaluate(const ManipulatorGeometry& g, const JointVector& q,
                    double phi, bool clamp) {
  return evaluate(g, q, orientation_terms(g, std::cos(phi), std::sin(phi)),
                  clamp);
}

double branch_value(const BranchPair& bp, int branch) {
  return branch > 0 ? bp.g_plus : bp.g_minus;
}

// Orientation in [lo, hi] where h2 crosses zero; valid_at_lo tells which end
// has intersecting circles. Returns the end point on the valid side.
double find_tangency(const ManipulatorGeometry& g, const JointVector& q,
                     double lo, double hi, bool valid_at_lo) {
  double valid = valid_at_lo ? lo : hi;
  double invalid = valid_at_lo ? hi : lo;
  for (int it = 0; it < 200 && std::abs(invalid - valid) > 1e-15; ++it) {
    const double mid = 0.5 * (valid + invalid);
    if (mid == valid || mid == invalid) break;
    if (evaluate(g, q, mid, false).h2 >= 0.0) {
      valid = mid;
    } else {
      invalid = mid;
    }
  }
  return valid;
}

bool negative(double v) { return v < 0.0; }

double residual_of(const ManipulatorGeometry& g, const Pose& p,
                   const JointVector& q) {
  const JointVector rho = inverse_kinematics(g, p);
  return (rho - q).cwiseAbs().maxCoeff();
}

Pose newton_polish(const ManipulatorGeometry& g, const JointVector& q,
                   Pose pose, double* residual) {
  double best = residual_of(g, pose, q);
  for (int it = 0; it < 12 && best > 1e-15 * g.rho_max; ++it) {
    const auto b = attachment_points(g, pose);
    const Eigen::Matrix2d r = rotation(pose.phi);
    Eigen::Matrix3d jac;
    Eigen::Vector3d f;
    for (int i = 0; i < 3; ++i) {
      const PlanarPoint leg = b[i] - g.base[i];
      const PlanarPoint rb = r * g.platform_local[i];
      f[i] = leg.squaredNorm() - q[i] * q[i];
      jac(i, 0) = 2.0 * leg.x();
      jac(i, 1) = 2.0 * leg.y();
      jac(i, 2) = 2.0 * (leg.x() * -rb.y() + leg.y() * rb.x());
    }
    const Eigen::Vector3d step = jac.fullPivLu().solve(-f);
    if (!step.allFinite()) break;
    Pose next(pose.x + step[0], pose.y + step[1], pose.phi + step[2]);
    const double res = residual_of(g, next, q);
    if (!(res < best)) break;
    best = res;
    pose = next;
  }
  *residual = best;
  return pose;
}

}  // namespace

DirectKinematicsSolver::DirectKinematicsSolver(const ManipulatorGeometry& g,
                                               DKOptions options)
    : geometry_(g),
      options_(options),
      metric_(PoseMetric::for_geometry(g)) {
  if (options_.phi_samples < 8) throw ConfigError("phi_samples must be >= 8");
  const int n = options_.phi_samples;
  table_.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double phi = kTwoPi<double> * k / n;
    const OrientationTerms t =
        orientation_terms(geometry_, std::cos(phi), std::sin(phi));
    table_.push_back({t.unit.x(), t.unit.y(), t.dist, t.offset.x(),
                      t.offset.y(), t.dist > 0.0 ? 0.5 / t.dist : 0.0});
  }
}

void DirectKinematicsSolver::scan(const JointVector& q,
                                  std::vector<Bracket>* brackets,
                                  int* count) const {
  const int n = options_.phi_samples;
  const double step = kTwoPi<double> / n;
  int found = 0;
  auto record = [&](double lo, double hi, int branch) {
    ++found;
    if (brackets) brackets->push_back({std::min(lo, hi), std::max(lo, hi), branch});
  };

  const double r1 = q[0] * q[0];
  const double r2 = q[1] * q[1];
  const double r3 = q[2] * q[2];
  // Branch values at every sample from the precomputed table, padded with
  // one wrapped sample at each end: index k + 1 holds sample k.
  thread_local std::vector<double> gp, gm;
  thread_local std::vector<unsigned char> valid, flag;
  const std::size_t padded = static_cast<std::size_t>(n) + 2;
  gp.resize(padded);
  gm.resize(padded);
  valid.resize(padded);
  flag.resize(padded);
  for (int k = 0; k < n; ++k) {
    const auto& row = table_[static_cast<std::size_t>(k)];
    const double a = (r1 - r2 + row[2] * row[2]) * row[5];
    const double h2 = r1 - a * a;
    const double h = std::sqrt(std::max(h2, 0.0));
    const double ax = a * row[0] + row[3], ay = a * row[1] + row[4];
    const double cx = -h * row[1], cy = h * row[0];
    gp[k + 1] = (ax + cx) * (ax + cx) + (ay + cy) * (ay + cy) - r3;
    gm[k + 1] = (ax - cx) * (ax - cx) + (ay - cy) * (ay - cy) - r3;
    valid[k + 1] = h2 >= 0.0 && row[2] > 0.0;
  }
  gp[0] = gp[n];
  gm[0] = gm[n];
  valid[0] = valid[n];
  gp[n + 1] = gp[1];
  gm[n + 1] = gm[1];
  valid[n + 1] = valid[1];
  // Samples needing attention: a sign change or tangency towards the next
  // sample, a tangency behind, or a change of slope sign on a branch.
  for (int i = 1; i <= n; ++i) {
    const bool v = valid[i];
    const bool change = (gp[i] < 0.0) != (gp[i + 1] < 0.0) || (gm[i] < 0.0) != (gm[i + 1] < 0.0);
    const bool turn = (gp[i] - gp[i - 1] < 0.0) != (gp[i + 1] - gp[i] < 0.0) ||
                      (gm[i] - gm[i - 1] < 0.0) != (gm[i + 1] - gm[i] < 0.0);
    flag[i] = (v != static_cast<bool>(valid[i + 1])) | (v != static_cast<bool>(valid[i - 1])) |
              (v & (change | turn));
  }

  // A branch can dip through zero and back between two samples (a close
  // root pair near a fold). When a sample is an extremum of |g| along the
  // branch and lies within a few curvature units of zero, the extremum is
  // located by golden-section search and a sign flip there gives two roots.
  struct Probe {
    double phi = 0.0;
    double g[2] = {0.0, 0.0};  // + and - branch values
    bool valid = false;
  };
  auto sample = [&](int i, double phi) {
    return Probe{phi, {gp[i], gm[i]}, valid[i] != 0};
  };
  auto near_dip = [](double gl, double g0, double gr) {
    const bool neg = negative(g0);
    if (negative(gl) != neg || negative(gr) != neg) return false;
    const double s = neg ? -1.0 : 1.0;
    const double d1 = s * (g0 - gl), d2 = s * (gr - g0);
    return d1 < 0.0 && d2 > 0.0 && s * g0 <= 4.0 * (d2 - d1);
  };
  auto refine_dip = [&](double lo, double hi, double s, int branch) {
    auto f = [&](double phi) {
      return s * branch_value(evaluate(geometry_, q, phi, true), branch);
    };
    constexpr double kInv = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - kInv * (b - a), d = a + kInv * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 80 && fc >= 0.0 && fd >= 0.0 && std::abs(b - a) > 1e-11; ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - kInv * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + kInv * (b - a);
        fd = f(d);
      }
    }
    if (fc >= 0.0 && fd >= 0.0) return;
    const double gap = fc < 0.0 ? c : d;
    record(lo, gap, branch);
    record(gap, hi, branch);
  };
  auto dip = [&](const Probe& l, const Probe& m, const Probe& r) {
    for (int b = 0; b < 2; ++b) {
      if (near_dip(l.g[b], m.g[b], r.g[b])) {
        refine_dip(l.phi, r.phi, negative(m.g[b]) ? -1.0 : 1.0, b == 0 ? +1 : -1);
      }
    }
  };

  // Probe standing in for an invalid left neighbour after a tangency; a
  // tangency interval always flags both of its samples.
  Probe tangency_left;
  for (int i = 1; i <= n; ++i) {
    if (!flag[i]) continue;
    const double lo = step * (i - 1);
    const double hi = step * i;
    const bool valid_lo = valid[i] != 0;
    const bool valid_hi = valid[i + 1] != 0;
    Probe tangency_right, next_left;
    if (valid_lo && valid_hi) {
      if (negative(gp[i]) != negative(gp[i + 1])) record(lo, hi, +1);
      if (negative(gm[i]) != negative(gm[i + 1])) record(lo, hi, -1);
    } else if (valid_lo != valid_hi) {
      // The branches meet at a tangency inside the interval. Both behave
      // like sqrt(phi - t) there and can turn around within the interval,
      // so the valid part is sampled evenly in the half chord.
      const double t = find_tangency(geometry_, q, lo, hi, valid_lo);
      const double far = valid_lo ? lo : hi;
      constexpr int kSub = 16;
      const BranchPair at_t = evaluate(geometry_, q, t, true);
      Probe before, a{t, {at_t.g_plus, at_t.g_plus}, true};
      for (int j = 1; j <= kSub; ++j) {
        const double u = static_cast<double>(j) / kSub;
        Probe b;
        if (j == kSub) {
          b = sample(valid_lo ? i : i + 1, far);
        } else {
          const double phi = t + (far - t) * u * u;
          const BranchPair bp = evaluate(geometry_, q, phi, true);
          b = Probe{phi, {bp.g_plus, bp.g_minus}, true};
        }
        if (negative(a.g[0]) != negative(b.g[0])) record(a.phi, b.phi, +1);
        if (negative(a.g[1]) != negative(b.g[1])) record(a.phi, b.phi, -1);
        if (before.valid) dip(before, a, b);
        if (j == kSub - 1) (valid_lo ? tangency_right : next_left) = b;
        before = a;
        a = b;
      }
    }
    if (valid_lo) {
      const Probe l = tangency_left.valid ? tangency_left : sample(i - 1, lo - step);
      const Probe r = tangency_right.valid ? tangency_right : sample(i + 1, hi);
      if (l.valid && r.valid) dip(l, sample(i, lo), r);
    }
    tangency_left = next_left;
  }
  if (count) *count = found;
}

int DirectKinematicsSolver::count(const JointVector& q) const {
  int n = 0;
  scan(q, nullptr, &n);
  return n;
}

DKSolutionSet DirectKinematicsSolver::solve(const JointVector& q) const {
  std::vector<Bracket> brackets;
  int n = 0;
  scan(q, &brackets, &n);

  std::vector<std::pair<Pose, double>> found;
  for (const Bracket& br : brackets) {
    double lo = br.lo, hi = br.hi;
    double g_lo = branch_value(evaluate(geometry_, q, lo, true), br.branch);
    for (int it = 0; it < 200 && hi - lo > options_.phi_tolerance; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      const double g_mid =
          branch_value(evaluate(geometry_, q, mid, true), br.branch);
      if (negative(g_mid) == negative(g_lo)) {
        lo = mid;
        g_lo = g_mid;
      } else {
        hi = mid;
      }
    }
    const double phi = 0.5 * (lo + hi);
    const BranchPair bp = evaluate(geometry_, q, phi, true);
    const PlanarPoint p = br.branch > 0 ? bp.p_plus : bp.p_minus;
    double residual = 0.0;
    const Pose polished =
        newton_polish(geometry_, q, Pose(p.x(), p.y(), phi), &residual);
    if (residual > options_.residual_tolerance) {
      throw SolverDegeneracy(
          "direct kinematics root at a branch tangency did not converge "
          "(residual " + std::to_string(residual) + ")");
    }
    found.emplace_back(polished, residual);
  }

  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) { return a.first.phi < b.first.phi; });
  std::vector<bool> dropped(found.size(), false);
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (dropped[i]) continue;
    for (std::size_t j = i + 1; j < found.size(); ++j) {
      if (dropped[j]) continue;
      if (metric_.distance(found[i].first, found[j].first) <
          options_.dedup_distance) {
        if (found[j].second < found[i].second) std::swap(found[i], found[j]);
        dropped[j] = true;
      }
    }
  }

  DKSolutionSet out;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (dropped[i]) continue;
    out.poses.push_back(found[i].first);
    out.residuals.push_back(found[i].second);
  }
  return out;
}

DKSolutionSet direct_kinematics(const ManipulatorGeometry& g,
                                const JointVector& q, DKOptions options) {
  return DirectKinematicsSolver(g, options).solve(q);
}

double closure_residual(const ManipulatorGeometry& g, const Pose& p,
                        const JointVector& q) {
  return residual_of(g, p, q);
}

}  // namespace pkatlas
