#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "vcreg/edt.hpp"
#include "vcreg/errors.hpp"
#include "vcreg/rng.hpp"
#include "vcreg/volume.hpp"
#include "vcreg/volume_io.hpp"

using namespace vcreg;

namespace {

Volume3D make_mask(std::array<int, 3> dims, std::array<double, 3> spacing) {
  Volume3D m;
  m.dims = dims;
  m.spacing = spacing;
  m.origin = {0, 0, 0};
  m.data.assign(m.size(), 0.0f);
  return m;
}

// Independent oracle: min distance over every boundary face midpoint.
Volume3D brute_force_sdt(const Volume3D& mask) {
  std::vector<Vec3> mids;
  const auto& d = mask.dims;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (i + 1 < d[0] && mask.at(i, j, k) != mask.at(i + 1, j, k))
          mids.push_back({(i + 0.5) * mask.spacing[0], j * mask.spacing[1],
                          k * mask.spacing[2]});
        if (j + 1 < d[1] && mask.at(i, j, k) != mask.at(i, j + 1, k))
          mids.push_back({i * mask.spacing[0], (j + 0.5) * mask.spacing[1],
                          k * mask.spacing[2]});
        if (k + 1 < d[2] && mask.at(i, j, k) != mask.at(i, j, k + 1))
          mids.push_back({i * mask.spacing[0], j * mask.spacing[1],
                          (k + 0.5) * mask.spacing[2]});
      }
  REQUIRE(!mids.empty());
  Volume3D out = mask;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const Vec3 p{i * mask.spacing[0], j * mask.spacing[1], k * mask.spacing[2]};
        double best = 1e300;
        for (const auto& q : mids) best = std::min(best, norm(p - q));
        out.at(i, j, k) = static_cast<float>(mask.at(i, j, k) == 1.0f ? best : -best);
      }
  return out;
}

}  // namespace

TEST_CASE("distance transform: single center voxel") {
  auto m = make_mask({5, 5, 5}, {1, 1, 1});
  m.at(2, 2, 2) = 1.0f;
  const auto sdt = distance_transform(m);
  CHECK(sdt.at(2, 2, 2) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(sdt.at(3, 2, 2) == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(sdt.at(2, 1, 2) == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(sdt.at(2, 2, 4) < -1.0);
}

TEST_CASE("distance transform: slab is linear in z and flips sign at the interface") {
  auto m = make_mask({6, 6, 6}, {1, 1, 1});
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 6; ++j)
      for (int i = 0; i < 6; ++i) m.at(i, j, k) = 1.0f;
  const auto sdt = distance_transform(m);
  for (int k = 0; k < 6; ++k)
    for (int j = 0; j < 6; ++j)
      for (int i = 0; i < 6; ++i) {
        const double expected = 2.5 - k;  // interface plane at k = 2.5
        CHECK(sdt.at(i, j, k) == doctest::Approx(expected).epsilon(1e-9));
      }
}

TEST_CASE("distance transform: inverting the mask negates the field") {
  Rng rng(310);
  auto m = make_mask({9, 8, 7}, {0.8, 1.1, 0.9});
  for (auto& f : m.data) f = rng.uniform() < 0.4 ? 1.0f : 0.0f;
  m.at(0, 0, 0) = 0.0f;
  m.at(4, 4, 3) = 1.0f;
  auto inv = m;
  for (auto& f : inv.data) f = 1.0f - f;
  const auto a = distance_transform(m);
  const auto b = distance_transform(inv);
  for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == -b.data[i]);
}

TEST_CASE("distance transform matches the brute-force oracle") {
  Rng rng(311);
  for (int trial = 0; trial < 3; ++trial) {
    auto m = make_mask({14, 12, 10}, {0.7, 1.0, 1.3});
    // Union of random balls, evaluated at voxel centers.
    const int n_balls = 2 + trial;
    std::vector<Vec3> centers;
    std::vector<double> radii;
    for (int b = 0; b < n_balls; ++b) {
      centers.push_back({rng.uniform(2.0, 8.0), rng.uniform(2.0, 9.0), rng.uniform(2.0, 10.0)});
      radii.push_back(rng.uniform(1.5, 3.5));
    }
    for (int k = 0; k < 10; ++k)
      for (int j = 0; j < 12; ++j)
        for (int i = 0; i < 14; ++i) {
          const Vec3 p{i * 0.7, j * 1.0, k * 1.3};
          for (int b = 0; b < n_balls; ++b)
            if (norm(p - centers[b]) < radii[b]) m.at(i, j, k) = 1.0f;
        }
    bool has1 = false, has0 = false;
    for (float f : m.data) (f == 1.0f ? has1 : has0) = true;
    REQUIRE(has1);
    REQUIRE(has0);

    const auto got = distance_transform(m);
    const auto ref = brute_force_sdt(m);
    double worst = 0.0;
    for (std::size_t i = 0; i < got.data.size(); ++i)
      worst = std::max(worst, std::abs(static_cast<double>(got.data[i]) - ref.data[i]));
    CHECK(worst <= 0.5 * 0.7);
    CHECK(worst <= 1e-5);  // construction is exact up to float storage
  }
}

TEST_CASE("distance transform rejects degenerate and non-binary masks") {
  auto m = make_mask({4, 4, 4}, {1, 1, 1});
  CHECK_THROWS_AS(distance_transform(m), DataError);
  for (auto& f : m.data) f = 1.0f;
  CHECK_THROWS_AS(distance_transform(m), DataError);
  m.at(0, 0, 0) = 0.5f;
  CHECK_THROWS_AS(distance_transform(m), DataError);
}

TEST_CASE("truncate and clamp_inside follow the stated piecewise rules") {
  auto v = make_mask({2, 2, 2}, {1, 1, 1});
  v.data = {3.1f, -1.0f, 2.0f, 0.3f, 2.6f, -0.7f, 0.0f, 1.9f};
  const auto t = truncate(v, 2.0);
  CHECK(t.data[0] == 2.0f);
  CHECK(t.data[1] == -1.0f);
  CHECK(t.data[2] == 2.0f);

  const auto c = clamp_inside(v, 2.0);
  CHECK(c.data[5] == 0.0f);
  CHECK(c.data[3] == 0.3f);
  CHECK(c.data[4] == 2.0f);

  // Idempotence.
  const auto cc = clamp_inside(c, 2.0);
  for (std::size_t i = 0; i < c.data.size(); ++i) CHECK(cc.data[i] == c.data[i]);
}

namespace {

PullbackGrid small_pullback(int n, int h, int w) {
  PullbackGrid p;
  p.n_frames = n;
  p.height = h;
  p.width = w;
  p.data.assign(static_cast<std::size_t>(n) * h * w, 0.0f);
  p.valid.assign(n, 1);
  return p;
}

}  // namespace

TEST_CASE("longitudinal smoothing: constant stack is unchanged") {
  auto p = small_pullback(7, 4, 4);
  for (auto& f : p.data) f = 1.25f;
  const auto s = gaussian_smooth_longitudinal(p, 1.0, 3);
  for (float f : s.data) CHECK(f == doctest::Approx(1.25f).epsilon(1e-6));
}

TEST_CASE("longitudinal smoothing: vanishing sigma is the identity") {
  Rng rng(312);
  auto p = small_pullback(6, 3, 3);
  for (auto& f : p.data) f = static_cast<float>(rng.uniform(-1, 1));
  const auto s = gaussian_smooth_longitudinal(p, 1e-9, 5);
  for (std::size_t i = 0; i < p.data.size(); ++i)
    CHECK(s.data[i] == doctest::Approx(p.data[i]).epsilon(1e-6));
}

TEST_CASE("longitudinal smoothing: impulse spreads with normalized Gaussian weights") {
  auto p = small_pullback(11, 2, 2);
  p.frame(5)[0] = 1.0f;
  const auto s = gaussian_smooth_longitudinal(p, 1.0, 3);
  const double a = std::exp(-0.5);
  const double denom = 1.0 + 2.0 * a;
  CHECK(s.frame(5)[0] == doctest::Approx(1.0 / denom).epsilon(1e-6));
  CHECK(s.frame(4)[0] == doctest::Approx(a / denom).epsilon(1e-6));
  CHECK(s.frame(6)[0] == doctest::Approx(a / denom).epsilon(1e-6));
  CHECK(s.frame(3)[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("longitudinal smoothing: per-column sums preserved when all frames valid") {
  Rng rng(313);
  auto p = small_pullback(9, 3, 2);
  for (auto& f : p.data) f = static_cast<float>(rng.uniform(0, 2));
  const auto s = gaussian_smooth_longitudinal(p, 1.3, 5);
  for (std::size_t px = 0; px < p.frame_pixels(); ++px) {
    double before = 0, after = 0;
    for (int f = 0; f < p.n_frames; ++f) {
      before += p.frame(f)[px];
      after += s.frame(f)[px];
    }
    CHECK(after == doctest::Approx(before).epsilon(1e-5));
  }
}

TEST_CASE("longitudinal smoothing: invalid frames are excluded and renormalized") {
  auto p = small_pullback(5, 2, 2);
  for (int f = 0; f < 5; ++f) p.frame(f)[0] = static_cast<float>(f);
  p.valid[3] = 0;
  const auto s = gaussian_smooth_longitudinal(p, 1.0, 3);
  const double a = std::exp(-0.5);
  // Frame 2 sees taps {1, 2} only; tap 3 is masked out.
  CHECK(s.frame(2)[0] == doctest::Approx((a * 1.0 + 2.0) / (a + 1.0)).epsilon(1e-6));
  // Frame 3 itself is invalid; neighbors still combine around it.
  CHECK(s.frame(3)[0] == doctest::Approx((a * 2.0 + a * 4.0) / (2.0 * a)).epsilon(1e-6));
}

TEST_CASE("longitudinal smoothing rejects even kernel sizes") {
  auto p = small_pullback(4, 2, 2);
  CHECK_THROWS_AS(gaussian_smooth_longitudinal(p, 1.0, 4), ConfigError);
}

TEST_CASE("sample_trilinear: voxel centers and x-midpoints") {
  Volume3D v = make_mask({4, 3, 3}, {0.5, 1.0, 1.0});
  v.origin = {1.0, -2.0, 0.5};
  Rng rng(314);
  for (auto& f : v.data) f = static_cast<float>(rng.uniform(-1, 1));

  std::vector<Vec3> pts = {v.voxel_center(2, 1, 1)};
  const Vec3 mid = 0.5 * (v.voxel_center(1, 2, 0) + v.voxel_center(2, 2, 0));
  pts.push_back(mid);
  std::vector<double> vals;
  std::vector<Vec3> grads;
  sample_trilinear(v, pts, vals, &grads);
  CHECK(vals[0] == doctest::Approx(v.at(2, 1, 1)).epsilon(1e-12));
  const double a = v.at(1, 2, 0), b = v.at(2, 2, 0);
  CHECK(vals[1] == doctest::Approx(0.5 * (a + b)).epsilon(1e-12));
  CHECK(grads[1].x == doctest::Approx((b - a) / 0.5).epsilon(1e-9));
}

TEST_CASE("sample_trilinear gradient matches central differences away from boundaries") {
  Rng rng(315);
  Volume3D v = make_mask({10, 9, 8}, {0.6, 0.8, 1.0});
  for (auto& f : v.data) f = static_cast<float>(rng.uniform(-2, 2));
  std::vector<Vec3> pts;
  // Strictly inside cells: the interpolant has derivative jumps on cell
  // faces, where a straddling central difference is meaningless.
  auto coord = [&](int lo, int hi, double sp) {
    return (std::floor(rng.uniform(lo, hi)) + rng.uniform(0.05, 0.95)) * sp;
  };
  for (int t = 0; t < 200; ++t)
    pts.push_back({coord(1, 8, 0.6), coord(1, 7, 0.8), coord(1, 6, 1.0)});
  std::vector<double> vals;
  std::vector<Vec3> grads;
  sample_trilinear(v, pts, vals, &grads);
  const double h = 1e-4;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int d = 0; d < 3; ++d) {
      Vec3 pp = pts[i], pm = pts[i];
      pp[d] += h;
      pm[d] -= h;
      std::vector<double> vp, vm;
      sample_trilinear(v, {pp}, vp, nullptr);
      sample_trilinear(v, {pm}, vm, nullptr);
      const double fd = (vp[0] - vm[0]) / (2 * h);
      const double an = grads[i][d];
      if (std::abs(fd) > 1e-8)
        CHECK(std::abs(an - fd) / std::max(1.0, std::abs(fd)) <= 1e-5);
    }
  }
}

TEST_CASE("volume and pullback files round-trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "vcreg_io_test";
  fs::create_directories(dir);

  Rng rng(316);
  Volume3D v = make_mask({5, 4, 3}, {0.25, 0.25, 0.5});
  v.origin = {-1.5, 2.0, 3.25};
  for (auto& f : v.data) f = static_cast<float>(rng.uniform(-2, 2));
  SdfConvention conv{1.75};
  io::save_volume(dir / "vol.json", v, conv);
  SdfConvention back;
  const Volume3D w = io::load_volume(dir / "vol.json", &back);
  CHECK(w.dims == v.dims);
  CHECK(w.spacing == v.spacing);
  CHECK(w.origin.x == v.origin.x);
  CHECK(back.tau == doctest::Approx(1.75));
  CHECK(w.data == v.data);

  auto p = small_pullback(6, 5, 4);
  p.in_plane_spacing = 0.08;
  p.frame_spacing = 0.4;
  p.valid[2] = 0;
  for (auto& f : p.data) f = static_cast<float>(rng.uniform(0, 2));
  io::save_pullback(dir / "pull.json", p);
  const PullbackGrid q = io::load_pullback(dir / "pull.json");
  CHECK(q.n_frames == p.n_frames);
  CHECK(q.height == p.height);
  CHECK(q.width == p.width);
  CHECK(q.valid == p.valid);
  CHECK(q.data == p.data);

  CHECK_THROWS_AS(io::load_volume(dir / "missing.json"), DataError);

  // Truncated payload must be rejected.
  fs::resize_file(dir / "vol.raw", 10);
  CHECK_THROWS_AS(io::load_volume(dir / "vol.json"), DataError);
  fs::remove_all(dir);
}
