#include "vcreg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vcreg/errors.hpp"

namespace vcreg {

void Volume3D::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 2)
      throw DataError("volume dims must be >= 2 per axis, got " + std::to_string(dims[a]));
    if (!(spacing[a] > 0.0)) throw DataError("volume spacing must be positive");
  }
  if (data.size() != size())
    throw DataError("volume data length " + std::to_string(data.size()) +
                    " does not match dims product " + std::to_string(size()));
}

kernels::VolumeView Volume3D::view(double background) const {
  kernels::VolumeView v;
  v.data = data.data();
  v.nx = dims[0];
  v.ny = dims[1];
  v.nz = dims[2];
  v.ox = origin.x;
  v.oy = origin.y;
  v.oz = origin.z;
  v.inv_sx = 1.0 / spacing[0];
  v.inv_sy = 1.0 / spacing[1];
  v.inv_sz = 1.0 / spacing[2];
  v.background = background;
  return v;
}

void PullbackGrid::validate() const {
  if (n_frames < 1) throw DataError("pullback needs at least one frame");
  if (height < 2 || width < 2) throw DataError("pullback frame shape must be >= 2 pixels");
  if (!(in_plane_spacing > 0.0) || !(frame_spacing > 0.0))
    throw DataError("pullback spacings must be positive");
  if (data.size() != frame_pixels() * static_cast<std::size_t>(n_frames))
    throw DataError("pullback data length does not match n_frames * height * width");
  if (valid.size() != static_cast<std::size_t>(n_frames))
    throw DataError("pullback valid mask length does not match n_frames");
}

Volume3D truncate(const Volume3D& sdf, double tau) {
  Volume3D out = sdf;
  const float t = static_cast<float>(tau);
  for (auto& f : out.data) f = std::min(f, t);
  return out;
}

Volume3D clamp_inside(const Volume3D& field, double tau) {
  Volume3D out = field;
  const float t = static_cast<float>(tau);
  for (auto& f : out.data) f = std::clamp(f, 0.0f, t);
  return out;
}

PullbackGrid clamp_inside(const PullbackGrid& field, double tau) {
  PullbackGrid out = field;
  const float t = static_cast<float>(tau);
  for (auto& f : out.data) f = std::clamp(f, 0.0f, t);
  return out;
}

PullbackGrid gaussian_smooth_longitudinal(const PullbackGrid& p, double sigma_frames,
                                          int ksize) {
  p.validate();
  if (ksize < 1 || ksize % 2 == 0)
    throw ConfigError("smoothing kernel size must be odd and >= 1, got " +
                      std::to_string(ksize));
  PullbackGrid out = p;
  if (ksize == 1) return out;

  const int r = ksize / 2;
  std::vector<double> w(ksize, 0.0);
  if (sigma_frames > 0.0) {
    for (int d = -r; d <= r; ++d)
      w[d + r] = std::exp(-0.5 * (d * d) / (sigma_frames * sigma_frames));
  } else {
    w[r] = 1.0;
  }

  // Mirror tap indices at the ends (reflect-even). With every frame valid the
  // smoothing matrix is symmetric and rows sum to one, so constant stacks and
  // per-column sums are both preserved.
  const int n = p.n_frames;
  auto reflect = [n](int i) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
    return i;
  };

  const std::size_t fp = p.frame_pixels();
  std::vector<float> acc(fp);
  for (int f = 0; f < n; ++f) {
    std::fill(acc.begin(), acc.end(), 0.0f);
    double denom = 0.0;
    for (int d = -r; d <= r; ++d) {
      const int m = reflect(f + d);
      if (!p.valid[m]) continue;
      const float wd = static_cast<float>(w[d + r]);
      kernels::ops().axpy_f32(acc.data(), p.frame(m), wd, fp);
      denom += w[d + r];
    }
    float* dst = out.frame(f);
    if (denom > 0.0) {
      const float inv = static_cast<float>(1.0 / denom);
      for (std::size_t i = 0; i < fp; ++i) dst[i] = acc[i] * inv;
    }
    // denom == 0 (no valid tap): frame passes through unchanged.
  }
  return out;
}

void sample_trilinear(const Volume3D& vol, const std::vector<Vec3>& points,
                      std::vector<double>& values, std::vector<Vec3>* grads,
                      double background) {
  vol.validate();
  const std::size_t n = points.size();
  std::vector<double> px(n), py(n), pz(n);
  for (std::size_t i = 0; i < n; ++i) {
    px[i] = points[i].x;
    py[i] = points[i].y;
    pz[i] = points[i].z;
  }
  values.resize(n);
  const kernels::VolumeView v = vol.view(background);
  if (grads != nullptr) {
    std::vector<double> gx(n), gy(n), gz(n);
    kernels::ops().trilinear_batch(v, px.data(), py.data(), pz.data(), n, values.data(),
                                   gx.data(), gy.data(), gz.data());
    grads->resize(n);
    for (std::size_t i = 0; i < n; ++i) (*grads)[i] = {gx[i], gy[i], gz[i]};
  } else {
    kernels::ops().trilinear_batch(v, px.data(), py.data(), pz.data(), n, values.data(),
                                   nullptr, nullptr, nullptr);
  }
}

}  // namespace vcreg
