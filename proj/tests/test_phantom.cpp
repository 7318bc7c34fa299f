#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vcreg/errors.hpp"
#include "vcreg/phantom.hpp"
#include "vcreg/rng.hpp"

using namespace vcreg;

namespace {

constexpr double kPi = 3.14159265358979323846;

VesselSpec straight_spec(double length = 40.0) {
  VesselSpec s;
  s.kind = VesselSpec::Kind::line;
  s.length = length;
  s.lumen_radius = 1.6;
  s.taper = 0.0;
  s.ripple_amp = 0.0;
  s.wall_thickness = 0.9;
  s.wall_eccentricity = 0.0;
  s.volume_margin = 10.0;
  return s;
}

GtCurves identity_curves(const VesselPhantom& ph, const SamplingGridSpec& spec, int n) {
  const double L = ph.centerline.total_length();
  const double cov = std::min(0.96, (n - 1) * spec.frame_spacing / L);
  const double lo = 0.5 * (1.0 - cov), hi = lo + cov;
  GtCurves g;
  g.s.resize(n);
  g.theta.assign(n, 0.0);
  g.du.assign(n, 0.0);
  g.dv.assign(n, 0.0);
  for (int i = 0; i < n; ++i) g.s[i] = lo + (hi - lo) * double(i) / (n - 1);
  return g;
}

double circ_diff_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

// independent swept-tube field: union of spheres along the smooth centerline
// with the smooth radius profile, plus union-of-spheres branches
double sweep_oracle(const VesselPhantom& ph, const std::vector<Landmark3D>& marks,
                    const std::vector<double>& branch_r, const std::vector<double>& branch_len,
                    const Vec3& p) {
  double best = ph.band_floor;
  const int ns = 4000;
  for (int i = 0; i <= ns; ++i) {
    const double s = double(i) / ns;
    const double v = ph.lumen_radius_at(s) - norm(p - ph.centerline.eval(s));
    if (v > best) best = v;
  }
  for (std::size_t j = 0; j < marks.size(); ++j) {
    const Vec3 a = marks[j].position;
    for (int i = 0; i <= 600; ++i) {
      const double t = double(i) / 600;
      const double r = branch_r[j] + t * (0.55 * branch_r[j] - branch_r[j]);
      const double v = r - norm(p - (a + (t * branch_len[j]) * marks[j].direction));
      if (v > best) best = v;
    }
  }
  return std::min(best, ph.tau);
}

}  // namespace

TEST_CASE("straight tube slices are disk distance fields") {
  const VesselSpec spec = straight_spec();
  const VesselPhantom ph = generate_vessel(spec);
  const Volume3D& v = ph.lumen_sdf;
  int checked = 0;
  for (int k = 0; k < v.dims[2]; k += 3)
    for (int j = 0; j < v.dims[1]; j += 2)
      for (int i = 0; i < v.dims[0]; i += 2) {
        const Vec3 p = v.voxel_center(i, j, k);
        if (p.z < 5.0 || p.z > 35.0) continue;  // clear of the end caps
        const double expect =
            std::min(std::max(1.6 - std::hypot(p.x, p.y), -4.0), 2.0);
        CHECK(std::abs(v.at(i, j, k) - expect) < 2e-5);
        ++checked;
      }
  CHECK(checked > 10000);
}

TEST_CASE("concentric wall reads as an annulus field") {
  const VesselSpec spec = straight_spec();
  const VesselPhantom ph = generate_vessel(spec);
  const Volume3D& w = ph.wall_sdf;
  int checked = 0;
  for (int k = 0; k < w.dims[2]; k += 5)
    for (int j = 0; j < w.dims[1]; j += 3)
      for (int i = 0; i < w.dims[0]; i += 3) {
        const Vec3 p = w.voxel_center(i, j, k);
        if (p.z < 5.0 || p.z > 35.0) continue;
        const double rho = std::hypot(p.x, p.y);
        const double expect =
            std::clamp(std::min(2.5 - rho, rho - 1.6), -4.0, 2.0);
        CHECK(std::abs(w.at(i, j, k) - expect) < 2e-5);
        ++checked;
      }
  CHECK(checked > 3000);
}

TEST_CASE("eccentric wall is thicker on the offset side") {
  VesselSpec spec = straight_spec();
  spec.wall_eccentricity = 0.45;
  spec.ecc_azimuth_deg = 20.0;
  const VesselPhantom ph = generate_vessel(spec);
  // just beyond the concentric outer radius: wall material only on the 20 side
  const double rho = 1.6 + 0.9 + 0.25;
  const double a = 20.0 * kPi / 180.0;
  const Vec3 thick{rho * std::cos(a), rho * std::sin(a), 20.0};
  const Vec3 thin{-rho * std::cos(a), -rho * std::sin(a), 20.0};
  CHECK(ph.analytic_wall(thick) > 0.0);
  CHECK(ph.analytic_wall(thin) < 0.0);
}

TEST_CASE("a branch only adds material (union monotonicity)") {
  const VesselSpec base = straight_spec();
  VesselSpec with = base;
  with.branches.push_back({0.5, 0.0, 90.0, 0.8, 5.0});
  const VesselPhantom a = generate_vessel(base), b = generate_vessel(with);
  REQUIRE(a.lumen_sdf.dims == b.lumen_sdf.dims);

  REQUIRE(b.landmarks.size() == 1);
  const Vec3 mouth = b.landmarks[0].position + 2.5 * b.landmarks[0].direction;
  CHECK(b.analytic_lumen(mouth) > 0.0);
  CHECK(b.analytic_lumen(mouth) > a.analytic_lumen(mouth));

  int raised = 0;
  for (std::size_t i = 0; i < a.lumen_sdf.data.size(); ++i) {
    CHECK(b.lumen_sdf.data[i] >= a.lumen_sdf.data[i]);
    if (b.lumen_sdf.data[i] > a.lumen_sdf.data[i]) ++raised;
  }
  CHECK(raised > 100);
}

TEST_CASE("voxel values match an independent swept-tube distance oracle") {
  VesselSpec spec;
  spec.kind = VesselSpec::Kind::random_smooth;
  spec.length = 60.0;
  spec.taper = 0.25;
  spec.ripple_amp = 0.04;
  spec.seed = 11;
  spec.branches.push_back({0.35, 40.0, 65.0, 0.9, 5.0});
  spec.branches.push_back({0.7, 200.0, 70.0, 0.8, 5.0});
  const VesselPhantom ph = generate_vessel(spec);

  std::vector<double> br{0.9, 0.8}, bl{5.0, 5.0};
  Rng rng(99);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const int i = int(rng.uniform(1.0, ph.lumen_sdf.dims[0] - 1.0));
    const int j = int(rng.uniform(1.0, ph.lumen_sdf.dims[1] - 1.0));
    const int k = int(rng.uniform(1.0, ph.lumen_sdf.dims[2] - 1.0));
    const Vec3 p = ph.lumen_sdf.voxel_center(i, j, k);
    const double got = ph.lumen_sdf.at(i, j, k);
    const double want = sweep_oracle(ph, ph.landmarks, br, bl, p);
    worst = std::max(worst, std::abs(got - want));
  }
  CHECK(worst <= 0.5 * 0.25);  // half the voxel spacing
}

TEST_CASE("zero-amplitude motion reproduces the identity sweep bit for bit") {
  VesselSpec vs = straight_spec(60.0);
  vs.branches.push_back({0.4, 120.0, 65.0, 0.9, 5.0});
  const VesselPhantom ph = generate_vessel(vs);
  SamplingGridSpec grid{64, 64, 0.1, 0.4};
  const int n = 96;

  MotionSpec still;
  still.stretch_amp = 0;
  still.twist_amp_deg = 0;
  still.transverse_frac = 0;
  still.seed = 5;
  const DistortedPullback a = generate_distorted_pullback(ph, still, grid, n);
  const DistortedPullback b = distorted_pullback_from_curves(ph, identity_curves(ph, grid, n), grid);

  CHECK(a.curves.s == b.curves.s);
  CHECK(a.lumen.data == b.lumen.data);
  CHECK(a.wall.data == b.wall.data);
  REQUIRE(a.gt_landmarks.size() == 1);
  CHECK(a.gt_landmarks[0].frame == b.gt_landmarks[0].frame);

  // recorded azimuth tracks the construction azimuth of the branch
  CHECK(circ_diff_deg(a.gt_landmarks[0].azimuth_deg, 120.0) < 1.0);

  // frame convention: last frame strictly before the take-off arclength
  int expect = -1;
  for (int i = 0; i < n; ++i)
    if (b.curves.s[i] < 0.4) expect = i;
  CHECK(a.gt_landmarks[0].frame == expect);
}

TEST_CASE("a constant thirty degree twist shifts every landmark azimuth by thirty degrees") {
  VesselSpec vs = straight_spec(60.0);
  vs.branches.push_back({0.3, 45.0, 60.0, 0.9, 5.0});
  vs.branches.push_back({0.65, 250.0, 70.0, 0.8, 5.0});
  const VesselPhantom ph = generate_vessel(vs);
  SamplingGridSpec grid{64, 64, 0.1, 0.4};
  const int n = 96;

  const GtCurves base = identity_curves(ph, grid, n);
  GtCurves twisted = base;
  twisted.theta.assign(n, 30.0 * kPi / 180.0);

  const DistortedPullback a = distorted_pullback_from_curves(ph, base, grid);
  const DistortedPullback b = distorted_pullback_from_curves(ph, twisted, grid);
  REQUIRE(a.gt_landmarks.size() == 2);
  REQUIRE(b.gt_landmarks.size() == 2);
  for (int j = 0; j < 2; ++j) {
    CHECK(b.gt_landmarks[j].frame == a.gt_landmarks[j].frame);
    // basis rotated by +30: apparent azimuth decreases by exactly 30
    const double want = std::fmod(a.gt_landmarks[j].azimuth_deg - 30.0 + 360.0, 360.0);
    CHECK(circ_diff_deg(b.gt_landmarks[j].azimuth_deg, want) < 1e-9);
  }
}

TEST_CASE("a power-law stretch moves landmark frames to the warped indices") {
  VesselSpec vs = straight_spec(60.0);
  vs.branches.push_back({0.3, 0.0, 60.0, 0.9, 5.0});
  vs.branches.push_back({0.6, 90.0, 60.0, 0.8, 5.0});
  const VesselPhantom ph = generate_vessel(vs);
  SamplingGridSpec grid{64, 64, 0.1, 0.4};
  const int n = 96;

  const GtCurves base = identity_curves(ph, grid, n);
  const double lo = base.s.front(), hi = base.s.back();
  GtCurves warped = base;
  for (int i = 0; i < n; ++i)
    warped.s[i] = lo + (hi - lo) * std::pow(double(i) / (n - 1), 1.2);

  const DistortedPullback d = distorted_pullback_from_curves(ph, warped, grid);
  REQUIRE(d.gt_landmarks.size() == 2);
  for (int j = 0; j < 2; ++j) {
    int expect = -1;
    for (int i = 0; i < n; ++i)
      if (warped.s[i] < ph.landmarks[j].s) expect = i;
    CHECK(d.gt_landmarks[j].frame == expect);
  }

  const DistortedPullback u = distorted_pullback_from_curves(ph, base, grid);
  CHECK(d.gt_landmarks[0].frame != u.gt_landmarks[0].frame);
}

TEST_CASE("excessive transverse motion is rejected as non-physical") {
  const VesselPhantom ph = generate_vessel(straight_spec(60.0));
  SamplingGridSpec grid{64, 64, 0.1, 0.4};
  MotionSpec wild;
  wild.transverse_frac = 1.5;
  wild.seed = 3;
  try {
    generate_distorted_pullback(ph, wild, grid, 96);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("non-physical motion") != std::string::npos);
  }
}

TEST_CASE("same seed gives identical phantoms, different seed does not") {
  VesselSpec vs;
  vs.kind = VesselSpec::Kind::random_smooth;
  vs.length = 60.0;
  vs.seed = 21;
  vs.branches.push_back({0.5, 10.0, 60.0, 0.9, 5.0});
  const VesselPhantom a = generate_vessel(vs), b = generate_vessel(vs);
  CHECK(a.lumen_sdf.data == b.lumen_sdf.data);
  CHECK(a.wall_sdf.data == b.wall_sdf.data);
  REQUIRE(a.landmarks.size() == b.landmarks.size());
  CHECK(norm(a.landmarks[0].direction - b.landmarks[0].direction) == 0.0);

  VesselSpec other = vs;
  other.seed = 22;
  const VesselPhantom c = generate_vessel(other);
  const bool differs =
      a.lumen_sdf.dims != c.lumen_sdf.dims || a.lumen_sdf.data != c.lumen_sdf.data;
  CHECK(differs);

  SamplingGridSpec grid{64, 64, 0.1, 0.4};
  MotionSpec m;
  m.seed = 77;
  const DistortedPullback p1 = generate_distorted_pullback(a, m, grid, 96);
  const DistortedPullback p2 = generate_distorted_pullback(a, m, grid, 96);
  CHECK(p1.lumen.data == p2.lumen.data);
  CHECK(p1.curves.s == p2.curves.s);
  MotionSpec m2 = m;
  m2.seed = 78;
  const DistortedPullback p3 = generate_distorted_pullback(a, m2, grid, 96);
  CHECK(p1.curves.s != p3.curves.s);
}

TEST_CASE("branch direction re-detected from the frames agrees with the recorded azimuth") {
  VesselSpec vs = straight_spec(60.0);
  vs.branches.push_back({0.45, 120.0, 65.0, 0.9, 6.0});
  const VesselPhantom ph = generate_vessel(vs);
  SamplingGridSpec grid{96, 96, 0.08, 0.4};
  const DistortedPullback d =
      distorted_pullback_from_curves(ph, identity_curves(ph, grid, 96), grid);
  REQUIRE(d.gt_landmarks.size() == 1);

  const int fi = d.gt_landmarks[0].frame + 3;  // a little beyond the take-off
  REQUIRE(fi < d.lumen.n_frames);
  const float* fr = d.lumen.frame(fi);
  const double cx = grid.center_col(), cy = grid.center_row();
  const double main_r = ph.lumen_radius_at(d.curves.s[fi]);
  double sx = 0, sy = 0;
  int cnt = 0;
  for (int r = 0; r < grid.height; ++r)
    for (int c = 0; c < grid.width; ++c) {
      const double x = (c - cx) * grid.in_plane_spacing, y = (r - cy) * grid.in_plane_spacing;
      if (fr[r * grid.width + c] > 0.0f && std::hypot(x, y) > main_r + 0.15) {
        sx += x;
        sy += y;
        ++cnt;
      }
    }
  REQUIRE(cnt > 20);
  const double detected = std::fmod(std::atan2(sy, sx) * 180.0 / kPi + 360.0, 360.0);
  CHECK(circ_diff_deg(detected, d.gt_landmarks[0].azimuth_deg) < 24.0);  // 2 * (360 / 30)
}

TEST_CASE("arc and helix centerlines produce plausible vessels") {
  for (auto kind : {VesselSpec::Kind::arc, VesselSpec::Kind::helix}) {
    VesselSpec vs;
    vs.kind = kind;
    vs.length = 60.0;
    const VesselPhantom ph = generate_vessel(vs);
    CHECK(std::abs(ph.centerline.total_length() - 60.0) / 60.0 < 0.15);
    int pos = 0;
    for (float x : ph.lumen_sdf.data)
      if (x > 0.0f) ++pos;
    CHECK(pos > 1000);
  }
}

TEST_CASE("invalid vessel and branch parameters are rejected") {
  VesselSpec vs = straight_spec();
  vs.branches.push_back({0.02, 0.0, 60.0, 0.9, 5.0});
  CHECK_THROWS_AS(generate_vessel(vs), DataError);  // take-off out of range

  VesselSpec order = straight_spec();
  order.branches.push_back({0.6, 0.0, 60.0, 0.9, 5.0});
  order.branches.push_back({0.4, 0.0, 60.0, 0.9, 5.0});
  CHECK_THROWS_AS(generate_vessel(order), DataError);

  VesselSpec big = straight_spec();
  big.branches.push_back({0.5, 0.0, 90.0, 0.9, 30.0});  // longer than the margin
  CHECK_THROWS_AS(generate_vessel(big), DataError);

  VesselSpec collapse = straight_spec();
  collapse.taper = 0.99;
  CHECK_THROWS_AS(generate_vessel(collapse), ConfigError);
}
