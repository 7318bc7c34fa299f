#include "vcreg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kernels_detail.hpp"
#include "vcreg/bspline.hpp"
#include "vcreg/errors.hpp"
#include "vcreg/kernels/kernels.hpp"
#include "vcreg/rng.hpp"

namespace vcreg {

namespace {

constexpr double kPi = 3.14159265358979323846;

double lumen_radius_profile(const VesselSpec& spec, double s) {
  return spec.lumen_radius * (1.0 - spec.taper * s) *
         (1.0 + spec.ripple_amp * std::sin(2.0 * kPi * spec.ripple_cycles * s));
}

std::vector<Vec3> centerline_points(const VesselSpec& spec) {
  std::vector<Vec3> pts;
  const double L = spec.length;
  switch (spec.kind) {
    case VesselSpec::Kind::line: {
      for (int i = 0; i < 8; ++i) pts.push_back({0, 0, L * i / 7.0});
      break;
    }
    case VesselSpec::Kind::arc: {
      const double span = 1.2, R = L / span;  // radians of bend
      for (int i = 0; i < 48; ++i) {
        const double a = span * i / 47.0;
        pts.push_back({R * (1.0 - std::cos(a)), 0, R * std::sin(a)});
      }
      break;
    }
    case VesselSpec::Kind::helix: {
      const double rh = 6.0, phi = L / (3.0 * rh), zspan = L * std::sqrt(1.0 - 1.0 / 9.0);
      for (int i = 0; i < 64; ++i) {
        const double t = i / 63.0;
        pts.push_back({rh * std::cos(phi * t) - rh, rh * std::sin(phi * t), zspan * t});
      }
      break;
    }
    case VesselSpec::Kind::random_smooth: {
      Rng rng(spec.seed);
      double amp[2][2], pha[2][2];
      for (int ax = 0; ax < 2; ++ax) {
        amp[ax][0] = rng.uniform(2.0, 4.0);
        pha[ax][0] = rng.uniform(0.0, 2.0 * kPi);
        amp[ax][1] = rng.uniform(0.8, 1.6);
        pha[ax][1] = rng.uniform(0.0, 2.0 * kPi);
      }
      auto lateral = [&](int ax, double t) {
        return amp[ax][0] * std::sin(2.0 * kPi * t + pha[ax][0]) +
               amp[ax][1] * std::sin(4.0 * kPi * t + pha[ax][1]);
      };
      for (int i = 0; i < 48; ++i) {
        const double t = i / 47.0;
        pts.push_back({lateral(0, t) - lateral(0, 0.0), lateral(1, t) - lateral(1, 0.0),
                       0.97 * L * t});
      }
      break;
    }
  }
  return pts;
}

void raster_capsules(Volume3D& vol, const std::vector<Capsule>& caps, double band) {
  const auto& k = kernels::ops();
  for (const Capsule& cap : caps) {
    const double pad = std::max(cap.r0, cap.r1) + band + vol.spacing[0];
    Vec3 lo{std::min(cap.a.x, cap.b.x) - pad, std::min(cap.a.y, cap.b.y) - pad,
            std::min(cap.a.z, cap.b.z) - pad};
    Vec3 hi{std::max(cap.a.x, cap.b.x) + pad, std::max(cap.a.y, cap.b.y) + pad,
            std::max(cap.a.z, cap.b.z) + pad};
    int i0 = std::max(0, int(std::floor((lo.x - vol.origin.x) / vol.spacing[0])));
    int j0 = std::max(0, int(std::floor((lo.y - vol.origin.y) / vol.spacing[1])));
    int k0 = std::max(0, int(std::floor((lo.z - vol.origin.z) / vol.spacing[2])));
    int i1 = std::min(vol.dims[0] - 1, int(std::ceil((hi.x - vol.origin.x) / vol.spacing[0])));
    int j1 = std::min(vol.dims[1] - 1, int(std::ceil((hi.y - vol.origin.y) / vol.spacing[1])));
    int k1 = std::min(vol.dims[2] - 1, int(std::ceil((hi.z - vol.origin.z) / vol.spacing[2])));
    if (i0 > i1 || j0 > j1 || k0 > k1) continue;
    const double x0 = vol.origin.x + i0 * vol.spacing[0];
    for (int kz = k0; kz <= k1; ++kz) {
      const double z = vol.origin.z + kz * vol.spacing[2];
      for (int jy = j0; jy <= j1; ++jy) {
        const double y = vol.origin.y + jy * vol.spacing[1];
        k.capsule_max_run(&vol.data[vol.index(i0, jy, kz)], i1 - i0 + 1, x0, vol.spacing[0],
                          y, z, cap.a.x, cap.a.y, cap.a.z, cap.b.x, cap.b.y, cap.b.z, cap.r0,
                          cap.r1);
      }
    }
  }
}

// max over capsules of the inside-positive capsule field, floored at `floor`
double composite_max(const std::vector<Capsule>& caps, const Vec3& p, double floor) {
  double best = floor;
  for (const Capsule& c : caps) {
    const Vec3 e = c.b - c.a;
    const double inv_len2 = 1.0 / dot(e, e);
    const double sdf = kernels::detail::capsule_point(p.x, p.y, p.z, c.a.x, c.a.y, c.a.z, e.x,
                                                      e.y, e.z, inv_len2, c.r0, c.r1);
    if (sdf > best) best = sdf;
  }
  return best;
}

double seg_distance(const Vec3& p, const Capsule& c) {
  const Vec3 e = c.b - c.a;
  const double t = std::clamp(dot(p - c.a, e) / dot(e, e), 0.0, 1.0);
  return norm(p - (c.a + t * e));
}

std::vector<Capsule> prune_for_frame(const std::vector<Capsule>& caps, const Vec3& center,
                                     double reach) {
  std::vector<Capsule> kept;
  for (const Capsule& c : caps)
    if (seg_distance(center, c) <= reach + std::max(c.r0, c.r1)) kept.push_back(c);
  return kept;
}

PullbackGrid sample_composite(const VesselPhantom& ph, const FrameSet& f,
                              const SamplingGridSpec& spec, bool wall) {
  PullbackGrid g;
  g.n_frames = f.size();
  g.height = spec.height;
  g.width = spec.width;
  g.in_plane_spacing = spec.in_plane_spacing;
  g.frame_spacing = spec.frame_spacing;
  g.data.resize(std::size_t(f.size()) * spec.height * spec.width);
  g.valid.assign(f.size(), 1);

  const double cx = spec.center_col(), cy = spec.center_row();
  const double halfdiag = 0.5 * std::hypot(spec.width * spec.in_plane_spacing,
                                           spec.height * spec.in_plane_spacing);
  const double reach = halfdiag - ph.band_floor + 0.5;  // band_floor is negative

  for (int i = 0; i < f.size(); ++i) {
    const std::vector<Capsule> lum = prune_for_frame(ph.lumen_capsules, f.R[i], reach);
    const std::vector<Capsule> out =
        wall ? prune_for_frame(ph.outer_capsules, f.R[i], reach) : std::vector<Capsule>{};
    float* fr = g.frame(i);
    for (int r = 0; r < spec.height; ++r) {
      const double beta = (r - cy) * spec.in_plane_spacing;
      for (int c = 0; c < spec.width; ++c) {
        const double alpha = (c - cx) * spec.in_plane_spacing;
        const Vec3 p = f.R[i] + alpha * f.U[i] + beta * f.V[i];
        const double lv = composite_max(lum, p, ph.band_floor);
        double v;
        if (wall) {
          const double ov = composite_max(out, p, ph.band_floor);
          v = std::clamp(std::min(ov, -lv), ph.band_floor, ph.tau);
        } else {
          v = std::min(lv, ph.tau);
        }
        fr[r * spec.width + c] = float(v);
      }
    }
  }
  return g;
}

}  // namespace

double VesselPhantom::analytic_lumen(const Vec3& p) const {
  return std::min(composite_max(lumen_capsules, p, band_floor), tau);
}

double VesselPhantom::analytic_wall(const Vec3& p) const {
  const double lv = composite_max(lumen_capsules, p, band_floor);
  const double ov = composite_max(outer_capsules, p, band_floor);
  return std::clamp(std::min(ov, -lv), band_floor, tau);
}

VesselPhantom generate_vessel(const VesselSpec& spec) {
  if (spec.lumen_radius <= 0 || spec.wall_thickness <= 0)
    throw ConfigError("vessel radii must be positive");
  if (spec.taper < 0 || spec.taper >= 1) throw ConfigError("taper must lie in [0, 1)");
  if (spec.voxel_spacing <= 0) throw ConfigError("voxel spacing must be positive");
  for (double s = 0; s <= 1.0; s += 0.01)
    if (lumen_radius_profile(spec, s) < 0.05)
      throw ConfigError("lumen radius profile collapses below 0.05 mm");
  for (std::size_t j = 0; j < spec.branches.size(); ++j) {
    const BranchSpec& b = spec.branches[j];
    if (b.s <= 0.05 || b.s >= 0.95)
      throw DataError("bifurcation arclength must lie in (0.05, 0.95)");
    if (j > 0 && b.s <= spec.branches[j - 1].s)
      throw DataError("bifurcation arclengths must be strictly increasing");
    if (b.radius <= 0 || b.length <= 0) throw ConfigError("branch radius/length must be positive");
  }

  VesselPhantom ph;
  ph.centerline_points = centerline_points(spec);
  ph.centerline = fit_centerline(ph.centerline_points);
  const double L = ph.centerline.total_length();

  const int nseg = std::max(8, int(std::ceil(L / 0.5)));
  const FrameSet seg = init_frames(ph.centerline, nseg + 1);

  const double ecc = spec.wall_eccentricity * spec.wall_thickness;
  const double ecc_az = spec.ecc_azimuth_deg * kPi / 180.0;
  auto offset = [&](int k) {
    return ecc * (std::cos(ecc_az) * seg.U[k] + std::sin(ecc_az) * seg.V[k]);
  };
  for (int k = 0; k < nseg; ++k) {
    const double s0 = seg.s[k], s1 = seg.s[k + 1];
    const double r0 = lumen_radius_profile(spec, s0), r1 = lumen_radius_profile(spec, s1);
    ph.lumen_capsules.push_back({seg.R[k], seg.R[k + 1], r0, r1});
    ph.outer_capsules.push_back({seg.R[k] + offset(k), seg.R[k + 1] + offset(k + 1),
                                 r0 + spec.wall_thickness, r1 + spec.wall_thickness});
  }

  if (!spec.branches.empty()) {
    std::vector<double> bs;
    for (const BranchSpec& b : spec.branches) bs.push_back(b.s);
    if (bs.size() == 1) bs.push_back(std::min(0.99, bs[0] + 0.02));  // resampler needs two
    const FrameSet bf = resample_frames(ph.centerline, bs, seg);
    for (std::size_t j = 0; j < spec.branches.size(); ++j) {
      const BranchSpec& b = spec.branches[j];
      const double az = b.azimuth_deg * kPi / 180.0, el = b.elevation_deg * kPi / 180.0;
      const Vec3 dir = std::cos(el) * bf.T[j] +
                       std::sin(el) * (std::cos(az) * bf.U[j] + std::sin(az) * bf.V[j]);
      const Vec3 tip = bf.R[j] + b.length * dir;
      ph.lumen_capsules.push_back({bf.R[j], tip, b.radius, 0.55 * b.radius});
      ph.outer_capsules.push_back({bf.R[j], tip, b.radius + 0.7 * spec.wall_thickness,
                                   0.55 * b.radius + 0.7 * spec.wall_thickness});
      ph.landmarks.push_back({int(j), b.s, bf.R[j], dir});
    }
  }

  // auto-sized volume: main centerline bounding box plus margin
  Vec3 lo = seg.R[0], hi = seg.R[0];
  for (const Vec3& p : seg.R) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  lo = lo - Vec3{spec.volume_margin, spec.volume_margin, spec.volume_margin};
  hi = hi + Vec3{spec.volume_margin, spec.volume_margin, spec.volume_margin};

  for (std::size_t j = 0; j < spec.branches.size(); ++j) {
    const Capsule& c = ph.lumen_capsules[nseg + j];
    const double need = std::max(c.r0, c.r1) + 0.7 * spec.wall_thickness + ph.tau +
                        2 * spec.voxel_spacing;
    for (const Vec3& e : {c.a, c.b})
      if (e.x - need < lo.x || e.x + need > hi.x || e.y - need < lo.y || e.y + need > hi.y ||
          e.z - need < lo.z || e.z + need > hi.z)
        throw DataError("branch exits the volume");
  }

  Volume3D lum;
  lum.spacing = {spec.voxel_spacing, spec.voxel_spacing, spec.voxel_spacing};
  lum.origin = lo;
  for (int ax = 0; ax < 3; ++ax) {
    const double span = (ax == 0 ? hi.x - lo.x : ax == 1 ? hi.y - lo.y : hi.z - lo.z);
    lum.dims[ax] = std::max(2, int(std::ceil(span / spec.voxel_spacing)) + 1);
  }
  lum.data.assign(lum.size(), float(ph.band_floor));
  Volume3D outer = lum;

  raster_capsules(lum, ph.lumen_capsules, -ph.band_floor);
  raster_capsules(outer, ph.outer_capsules, -ph.band_floor);

  ph.wall_sdf = outer;
  for (std::size_t i = 0; i < lum.data.size(); ++i) {
    const double w = std::min(double(outer.data[i]), -double(lum.data[i]));
    ph.wall_sdf.data[i] = float(std::clamp(w, ph.band_floor, ph.tau));
    lum.data[i] = std::min(lum.data[i], float(ph.tau));
  }
  ph.lumen_sdf = std::move(lum);
  ph.r_base = spec.lumen_radius;
  ph.taper = spec.taper;
  ph.ripple_amp = spec.ripple_amp;
  ph.ripple_cycles = spec.ripple_cycles;
  return ph;
}

LandmarkSet observe_landmarks(const std::vector<Landmark3D>& marks, const FrameSet& frames,
                              const std::vector<double>& s_global) {
  if (int(s_global.size()) != frames.size())
    throw DataError("frame arclength vector does not match the frame chain");
  LandmarkSet out;
  for (const Landmark3D& lm : marks) {
    int idx = -1;
    for (int i = 0; i < frames.size(); ++i)
      if (s_global[i] < lm.s) idx = i;
    if (idx < 0) continue;  // bifurcation proximal to the first frame
    double az = std::atan2(dot(lm.direction, frames.V[idx]), dot(lm.direction, frames.U[idx]));
    az *= 180.0 / kPi;
    az = std::fmod(az + 360.0, 360.0);
    out.push_back({lm.id, idx, az});
  }
  return out;
}

DistortedPullback distorted_pullback_from_curves(const VesselPhantom& ph,
                                                 const GtCurves& curves,
                                                 const SamplingGridSpec& spec) {
  const std::size_t n = curves.s.size();
  if (n < 2) throw DataError("distorted pullback needs at least 2 frames");
  if (curves.theta.size() != n || curves.du.size() != n || curves.dv.size() != n)
    throw DataError("ground-truth curves disagree on frame count");

  DistortedPullback out;
  const FrameSet base = init_frames(ph.centerline, int(n));
  out.gt_frames = compose(base, curves.s, curves.theta, curves.du, curves.dv, ph.centerline);

  for (int i = 0; i < out.gt_frames.size(); ++i)
    if (ph.analytic_lumen(out.gt_frames.R[i]) <= 0.0)
      throw DataError("non-physical motion: catheter exits the lumen at frame " +
                      std::to_string(i));

  out.lumen = sample_composite(ph, out.gt_frames, spec, false);
  out.wall = sample_composite(ph, out.gt_frames, spec, true);
  out.gt_landmarks = observe_landmarks(ph.landmarks, out.gt_frames, curves.s);
  out.curves = curves;
  return out;
}

DistortedPullback generate_distorted_pullback(const VesselPhantom& ph, const MotionSpec& motion,
                                              const SamplingGridSpec& spec, int n_frames) {
  if (n_frames < 8) throw ConfigError("distorted pullback needs at least 8 frames");
  if (motion.stretch_amp < 0 || motion.twist_amp_deg < 0 || motion.transverse_frac < 0)
    throw ConfigError("motion amplitudes must be nonnegative");
  if (motion.stretch_amp >= 0.9) throw ConfigError("stretch amplitude must stay below 0.9");
  if (motion.smoothness < 4) throw ConfigError("motion smoothness needs at least 4 controls");

  const double L = ph.centerline.total_length();
  const double cov = std::min(0.96, (n_frames - 1) * spec.frame_spacing / L);
  const double lo = 0.5 * (1.0 - cov), hi = lo + cov;

  std::vector<double> u(n_frames);
  for (int i = 0; i < n_frames; ++i) u[i] = double(i) / (n_frames - 1);
  const BsplineBasis basis = build_basis(u, motion.smoothness);

  Rng rng(motion.seed);
  auto draw = [&](Rng& r) {
    std::vector<double> c(motion.smoothness);
    for (auto& x : c) x = r.normal();
    std::vector<double> v = basis.apply(c);
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    if (m < 1e-12) std::fill(v.begin(), v.end(), 0.0);
    else
      for (auto& x : v) x /= m;
    return v;  // values in [-1, 1], peak magnitude 1
  };
  Rng rs = rng.fork(1), rt = rng.fork(2), rd = rng.fork(3);
  const std::vector<double> cs = draw(rs), ct = draw(rt), cu = draw(rd), cv = draw(rd);

  GtCurves g;
  g.s.resize(n_frames);
  g.theta.resize(n_frames);
  g.du.resize(n_frames);
  g.dv.resize(n_frames);

  // stretch: integrate a positive rate 1 + amp*cs, then renormalize to [lo, hi]
  std::vector<double> pre(n_frames, 0.0);
  for (int i = 1; i < n_frames; ++i) {
    const double rate = 0.5 * ((1.0 + motion.stretch_amp * cs[i - 1]) +
                               (1.0 + motion.stretch_amp * cs[i]));
    pre[i] = pre[i - 1] + rate;
  }
  for (int i = 0; i < n_frames; ++i) g.s[i] = lo + (hi - lo) * pre[i] / pre[n_frames - 1];

  const double amp_rad = motion.twist_amp_deg * kPi / 180.0;
  for (int i = 0; i < n_frames; ++i) g.theta[i] = amp_rad * ct[i];

  double mmax = 0;
  for (int i = 0; i < n_frames; ++i) mmax = std::max(mmax, std::hypot(cu[i], cv[i]));
  for (int i = 0; i < n_frames; ++i) {
    const double scale =
        mmax < 1e-12 ? 0.0 : motion.transverse_frac * ph.lumen_radius_at(g.s[i]) / mmax;
    g.du[i] = scale * cu[i];
    g.dv[i] = scale * cv[i];
  }
  return distorted_pullback_from_curves(ph, g, spec);
}

double VesselPhantom::lumen_radius_at(double s) const {
  return r_base * (1.0 - taper * s) * (1.0 + ripple_amp * std::sin(2.0 * kPi * ripple_cycles * s));
}

}  // namespace vcreg
