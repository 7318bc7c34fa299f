#include "vcreg/rigid.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "vcreg/errors.hpp"

namespace vcreg {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

AreaVector area_vector(const PullbackGrid& lumen) {
  lumen.validate();
  AreaVector out;
  out.area.resize(lumen.n_frames, 0.0);
  out.valid.resize(lumen.n_frames, 0);
  const double px_area = lumen.in_plane_spacing * lumen.in_plane_spacing;
  for (int i = 0; i < lumen.n_frames; ++i) {
    if (!lumen.valid[i]) continue;
    const float* fr = lumen.frame(i);
    std::size_t count = 0;
    for (std::size_t p = 0; p < lumen.frame_pixels(); ++p)
      if (fr[p] > 0.0f) ++count;
    out.area[i] = double(count) * px_area;
    out.valid[i] = 1;
  }
  return out;
}

CropIndices long_reg(const AreaVector& a_ct, const AreaVector& a_oct, int min_overlap) {
  if (min_overlap < 1) throw ConfigError("min_overlap must be positive");
  const int n = a_ct.size(), m = a_oct.size();
  if (n < min_overlap || m < min_overlap)
    throw DataError("area curve shorter than the minimum overlap of " +
                    std::to_string(min_overlap) + " frames");

  double best_score = std::numeric_limits<double>::infinity();
  int best_t = 0;
  bool found = false;
  // t = index of the oct curve's first frame within the ct curve
  for (int t = -(m - 1); t <= n - 1; ++t) {
    const int lo = std::max(0, t), hi = std::min(n, t + m);
    double ss = 0.0;
    int cnt = 0;
    for (int i = lo; i < hi; ++i) {
      const int j = i - t;
      if (!a_ct.valid[i] || !a_oct.valid[j]) continue;
      const double d = a_ct.area[i] - a_oct.area[j];
      ss += d * d;
      ++cnt;
    }
    if (cnt < min_overlap) continue;
    const double score = ss / cnt;
    const bool better =
        !found || score < best_score ||
        (score == best_score &&
         (std::abs(t) < std::abs(best_t) || (std::abs(t) == std::abs(best_t) && t < best_t)));
    if (better) {
      best_score = score;
      best_t = t;
      found = true;
    }
  }
  if (!found)
    throw DataError("no shift leaves an overlap of at least " + std::to_string(min_overlap) +
                    " mutually valid frames");

  CropIndices c;
  c.ct_start = std::max(0, best_t);
  c.ct_end = std::min(n, best_t + m);
  c.oct_start = c.ct_start - best_t;
  c.oct_end = c.ct_end - best_t;
  return c;
}

ThicknessMatrix thickness_matrix(const PullbackGrid& wall, int gamma) {
  wall.validate();
  if (gamma < 2) throw ConfigError("thickness matrix needs at least 2 rays");

  ThicknessMatrix tm;
  tm.n = wall.n_frames;
  tm.gamma = gamma;
  tm.H.assign(std::size_t(tm.n) * gamma, 0.0);
  tm.valid.assign(tm.n, 0);

  const int w = wall.width, h = wall.height;
  const double step_mm = 0.5 * wall.in_plane_spacing;
  const long max_steps = 4L * (w + h);  // 0.5-pixel steps cannot exceed 2*(w+h) in-bounds

  for (int i = 0; i < wall.n_frames; ++i) {
    if (!wall.valid[i]) continue;
    const float* fr = wall.frame(i);

    double cx = 0.0, cy = 0.0;
    std::size_t cnt = 0;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (fr[std::size_t(r) * w + c] > 0.0f) {
          cx += c;
          cy += r;
          ++cnt;
        }
    if (cnt == 0) continue;  // empty frame: zero row, flag stays cleared
    cx /= double(cnt);
    cy /= double(cnt);

    for (int k = 0; k < gamma; ++k) {
      const double phi = 2.0 * kPi * k / gamma;
      const double dx = 0.5 * std::cos(phi), dy = 0.5 * std::sin(phi);
      double x = cx, y = cy, len = 0.0;
      for (long j = 0; j < max_steps; ++j) {
        if (x < 0.0 || x > w - 1 || y < 0.0 || y > h - 1) break;
        const int pc = int(std::lround(x)), pr = int(std::lround(y));
        if (fr[std::size_t(pr) * w + pc] > 0.0f) len += step_mm;
        x += dx;
        y += dy;
      }
      tm.at(i, k) = len;
    }
    tm.valid[i] = 1;
  }
  return tm;
}

double rot_reg(const ThicknessMatrix& h_ct, const ThicknessMatrix& h_oct) {
  if (h_ct.gamma != h_oct.gamma) throw DataError("thickness matrices disagree on ray count");
  if (h_ct.n != h_oct.n)
    throw DataError("thickness matrices must be cropped to the same frame range");
  const int n = h_ct.n, gamma = h_ct.gamma;

  int common = 0;
  for (int i = 0; i < n; ++i)
    if (h_ct.valid[i] && h_oct.valid[i]) ++common;
  if (common < 5)
    throw DataError("rotational alignment needs at least 5 common valid frames, have " +
                    std::to_string(common));

  double best_score = std::numeric_limits<double>::infinity();
  int best_k = 0;
  for (int k = 0; k < gamma; ++k) {
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!h_ct.valid[i] || !h_oct.valid[i]) continue;
      for (int c = 0; c < gamma; ++c) {
        const double d = h_ct.at(i, (c + k) % gamma) - h_oct.at(i, c);
        ss += d * d;
      }
    }
    const double score = ss / (double(common) * gamma);
    if (score < best_score) {  // ascending k, so ties keep the smallest angle
      best_score = score;
      best_k = k;
    }
  }
  return 2.0 * kPi * double(best_k) / double(gamma);
}

}  // namespace vcreg
