#pragma once

#include <memory>
#include <vector>

#include "vcreg/vec3.hpp"

// Vessel centerline splines and the orthonormal frame chains swept along
// them. Orientation propagates by parallel transport (minimal rotation
// between consecutive tangents), so the chain carries no artificial twist.

namespace vcreg {

// Cubic spline through centerline points, reparametrized so that s in [0,1]
// is normalized arclength (s=0 proximal, s=1 distal). The reparametrization
// uses a dense sample table with piecewise-linear inversion; eval and
// derivative are exact duals of each other on that table, and both
// extrapolate the end segments for s slightly outside [0,1].
class Centerline {
 public:
  Vec3 eval(double s) const;
  Vec3 derivative(double s) const;  // d eval / d s
  double total_length() const;      // mm
  const std::vector<Vec3>& points() const;

  // View of the sub-range [s0, s1] as a centerline over [0,1]. Evaluation is
  // an affine pass-through to the parent, so no refit occurs and geometry is
  // preserved exactly.
  Centerline restrict(double s0, double s1) const;

 private:
  friend Centerline fit_centerline(const std::vector<Vec3>& points);
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  double lo_ = 0.0, hi_ = 1.0;
};

// Natural cubic interpolant through n >= 4 points with chord-length knots,
// then arclength-normalized. Throws DataError on duplicate consecutive
// points or too few points.
Centerline fit_centerline(const std::vector<Vec3>& points);

// Orthonormal frame chain: position R, tangent T, in-plane axes U and V with
// V = T x U, at arclength parameters s.
struct FrameSet {
  std::vector<Vec3> R, T, U, V;
  std::vector<double> s;

  int size() const { return static_cast<int>(R.size()); }
};

// Frames at n uniform arclength positions. The first frame's U is the global
// axis least aligned with T_0, projected onto T_0's orthogonal plane; later
// frames parallel-transport it. Deterministic. Throws NumericalError on a
// vanishing tangent.
FrameSet init_frames(const Centerline& c, int n);

// Frames at caller-chosen arclength values, orientation re-seeded from
// u_ref's first frame and transported down the chain. s must be strictly
// increasing ("catheter self-reversal" otherwise). resample_frames(c, s_init,
// init_frames(c, n)) reproduces init_frames exactly.
FrameSet resample_frames(const Centerline& c, const std::vector<double>& s,
                         const FrameSet& u_ref);

}  // namespace vcreg
