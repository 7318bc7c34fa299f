#include "vcreg/transforms.hpp"

#include <cmath>
#include <cstddef>

#include "vcreg/errors.hpp"
#include "vcreg/kernels/kernels.hpp"

namespace vcreg {

namespace {

void require_len(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw DataError(std::string(what) + ": expected " + std::to_string(want) +
                    " entries, got " + std::to_string(got));
}

void require_grid(const SamplingGridSpec& spec) {
  if (spec.height < 2 || spec.width < 2) throw ConfigError("sampling grid smaller than 2x2");
  if (!(spec.in_plane_spacing > 0)) throw ConfigError("in-plane spacing must be positive");
}

// World coordinates of every pixel of every frame, x-fastest within a row.
void fill_points(const FrameSet& f, const SamplingGridSpec& spec, std::vector<double>& px,
                 std::vector<double>& py, std::vector<double>& pz) {
  const std::size_t n = f.size() * std::size_t(spec.height) * spec.width;
  px.resize(n);
  py.resize(n);
  pz.resize(n);
  const double cx = spec.center_col(), cy = spec.center_row();
  const double sp = spec.in_plane_spacing;
  std::size_t k = 0;
  for (std::size_t i = 0; i < std::size_t(f.size()); ++i) {
    const Vec3 R = f.R[i], U = f.U[i], V = f.V[i];
    for (int r = 0; r < spec.height; ++r) {
      const double beta = (r - cy) * sp;
      for (int c = 0; c < spec.width; ++c, ++k) {
        const double alpha = (c - cx) * sp;
        px[k] = R.x + alpha * U.x + beta * V.x;
        py[k] = R.y + alpha * U.y + beta * V.y;
        pz[k] = R.z + alpha * U.z + beta * V.z;
      }
    }
  }
}

}  // namespace

FrameSet phi_long(const FrameSet& f, const std::vector<double>& s, const Centerline& c) {
  require_len(s.size(), f.size(), "phi_long arclengths");
  return resample_frames(c, s, f);
}

FrameSet phi_rot(FrameSet f, const std::vector<double>& theta) {
  require_len(theta.size(), f.size(), "phi_rot angles");
  for (std::size_t i = 0; i < std::size_t(f.size()); ++i) {
    const double ct = std::cos(theta[i]), st = std::sin(theta[i]);
    const Vec3 u = f.U[i], v = f.V[i];
    f.U[i] = ct * u + st * v;
    f.V[i] = -st * u + ct * v;
  }
  return f;
}

FrameSet phi_trans(FrameSet f, const std::vector<double>& d_u, const std::vector<double>& d_v) {
  require_len(d_u.size(), f.size(), "phi_trans u-displacements");
  require_len(d_v.size(), f.size(), "phi_trans v-displacements");
  for (std::size_t i = 0; i < std::size_t(f.size()); ++i)
    f.R[i] = f.R[i] + d_u[i] * f.U[i] + d_v[i] * f.V[i];
  return f;
}

FrameSet compose(const FrameSet& f, const std::vector<double>& s,
                 const std::vector<double>& theta, const std::vector<double>& d_u,
                 const std::vector<double>& d_v, const Centerline& c) {
  return phi_trans(phi_rot(phi_long(f, s, c), theta), d_u, d_v);
}

void sample_frames(const FrameSet& f, const Volume3D& vol, const SamplingGridSpec& spec,
                   std::vector<double>& values, std::vector<double>& gx,
                   std::vector<double>& gy, std::vector<double>& gz) {
  require_grid(spec);
  static thread_local std::vector<double> px, py, pz;
  fill_points(f, spec, px, py, pz);
  const std::size_t n = px.size();
  values.resize(n);
  gx.resize(n);
  gy.resize(n);
  gz.resize(n);
  kernels::ops().trilinear_batch(vol.view(0.0), px.data(), py.data(), pz.data(), n,
                                 values.data(), gx.data(), gy.data(), gz.data());
}

PullbackGrid virtual_catheter_sample(const FrameSet& f, const Volume3D& vol,
                                     const SamplingGridSpec& spec) {
  require_grid(spec);
  static thread_local std::vector<double> px, py, pz, val;
  fill_points(f, spec, px, py, pz);
  val.resize(px.size());
  kernels::ops().trilinear_batch(vol.view(0.0), px.data(), py.data(), pz.data(), px.size(),
                                 val.data(), nullptr, nullptr, nullptr);

  PullbackGrid g;
  g.n_frames = int(f.size());
  g.height = spec.height;
  g.width = spec.width;
  g.in_plane_spacing = spec.in_plane_spacing;
  g.frame_spacing = spec.frame_spacing;
  g.data.resize(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) g.data[i] = float(val[i]);
  g.valid.assign(f.size(), 1);
  return g;
}

}  // namespace vcreg
