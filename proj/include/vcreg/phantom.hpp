#pragma once

#include <cstdint>
#include <vector>

#include "vcreg/catheter_geometry.hpp"
#include "vcreg/transforms.hpp"
#include "vcreg/volume.hpp"

// Synthetic vessels with exact ground truth: a capsule-union signed distance
// composite swept along a generated centerline, bifurcation branches with
// recorded take-off geometry, and distorted virtual pullbacks whose target
// frames are sampled from the analytic composite rather than the voxel grid
// (the registration consumes the voxelized side, so the two discretizations
// differ by construction).

namespace vcreg {

struct BranchSpec {
  double s = 0.5;              // take-off arclength fraction on the main vessel
  double azimuth_deg = 0.0;    // around the tangent, from U toward V
  double elevation_deg = 60.0; // off the tangent; 90 = perpendicular
  double radius = 1.0;         // mm at the ostium
  double length = 6.0;         // mm
};

struct VesselSpec {
  enum class Kind { line, arc, helix, random_smooth };
  Kind kind = Kind::random_smooth;
  double length = 110.0;        // mm, approximate for generated curves
  double lumen_radius = 1.6;    // mm at s=0
  double taper = 0.25;          // fractional radius loss at s=1
  double ripple_amp = 0.04;     // sinusoidal radius modulation fraction
  double ripple_cycles = 3.0;
  double wall_thickness = 0.9;  // mm, mean
  double wall_eccentricity = 0.45;   // outer-axis offset as fraction of thickness
  double ecc_azimuth_deg = 20.0;     // direction of the offset in the (U,V) plane
  std::vector<BranchSpec> branches;  // strictly increasing s
  double voxel_spacing = 0.25;  // mm, isotropic
  double volume_margin = 10.0;  // mm beyond the main centerline bounding box
  std::uint64_t seed = 1;
};

// One inside-positive capsule: radius interpolates linearly from a to b.
struct Capsule {
  Vec3 a, b;
  double r0 = 1, r1 = 1;
};

struct Landmark3D {
  int id = 0;
  double s = 0;    // arclength fraction of the take-off on the main centerline
  Vec3 position;   // centerline point at s
  Vec3 direction;  // unit branch axis
};

// What a pullback sees of one bifurcation: the last frame before the split
// and the branch azimuth in that frame's (U,V) basis, degrees in [0, 360).
struct LandmarkObs {
  int id = 0;
  int frame = 0;
  double azimuth_deg = 0;
};
using LandmarkSet = std::vector<LandmarkObs>;

struct VesselPhantom {
  Volume3D lumen_sdf, wall_sdf;  // banded to [-4, tau], positive inside
  Centerline centerline;
  std::vector<Vec3> centerline_points;
  std::vector<Landmark3D> landmarks;
  std::vector<Capsule> lumen_capsules, outer_capsules;
  double tau = 2.0;
  double band_floor = -4.0;
  double r_base = 1.6, taper = 0.25, ripple_amp = 0.0, ripple_cycles = 3.0;

  // The exact field the voxel grids discretize, evaluated directly.
  double analytic_lumen(const Vec3& p) const;
  double analytic_wall(const Vec3& p) const;

  // main-lumen radius profile used at generation time
  double lumen_radius_at(double s) const;
};

// Builds the capsule composite, rasterizes both volumes, and records branch
// take-off landmarks. Throws DataError when a branch does not fit inside the
// auto-sized volume or branch arclengths are not strictly increasing.
VesselPhantom generate_vessel(const VesselSpec& spec);

struct MotionSpec {
  double stretch_amp = 0.15;    // bound on local relative stretch
  double twist_amp_deg = 30.0;  // bound on |theta|
  double transverse_frac = 0.2; // bound on |d| as a fraction of the local lumen radius
  int smoothness = 8;           // control points of the generating splines
  std::uint64_t seed = 1;
};

// Per-frame ground-truth deformation curves (s strictly increasing).
struct GtCurves {
  std::vector<double> s, theta, du, dv;
};

struct DistortedPullback {
  PullbackGrid lumen, wall;  // sampled from the analytic composite
  FrameSet gt_frames;
  LandmarkSet gt_landmarks;
  GtCurves curves;
};

// Composes the given curves onto the ideal frame chain and samples the
// analytic composite. Throws DataError("non-physical motion ...") when a
// frame center leaves the lumen.
DistortedPullback distorted_pullback_from_curves(const VesselPhantom& ph,
                                                 const GtCurves& curves,
                                                 const SamplingGridSpec& spec);

// Draws seeded smooth random curves rescaled to the stated amplitudes, then
// defers to distorted_pullback_from_curves. Frame arclengths cover the span
// (n_frames - 1) * frame_spacing centered on the vessel (capped at 96%).
DistortedPullback generate_distorted_pullback(const VesselPhantom& ph, const MotionSpec& motion,
                                              const SamplingGridSpec& spec, int n_frames);

// Landmark observations for an arbitrary frame chain: frame = last index with
// s_global[i] < landmark s (landmarks before the first frame are skipped),
// azimuth from that frame's U/V axes.
LandmarkSet observe_landmarks(const std::vector<Landmark3D>& marks, const FrameSet& frames,
                              const std::vector<double>& s_global);

}  // namespace vcreg
