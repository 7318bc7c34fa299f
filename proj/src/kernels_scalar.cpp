#include "kernels_detail.hpp"

namespace vcreg::kernels {
namespace {

using detail::vmax;
using detail::vmin;

void trilinear_batch_scalar(const VolumeView& vol, const double* px, const double* py,
                            const double* pz, std::size_t n, double* val, double* gx,
                            double* gy, double* gz) {
  if (gx != nullptr) {
    for (std::size_t i = 0; i < n; ++i)
      detail::trilinear_one(vol, px[i], py[i], pz[i], val[i], &gx[i], &gy[i], &gz[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      detail::trilinear_one(vol, px[i], py[i], pz[i], val[i], nullptr, nullptr, nullptr);
  }
}

double clamped_mse_scalar(const double* v, const float* t, std::size_t n, double tau) {
  double acc[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const double cv = vmin(vmax(v[i], 0.0), tau);
    const double r = cv - static_cast<double>(t[i]);
    acc[i & 3] += r * r;
  }
  return ((acc[0] + acc[1]) + acc[2]) + acc[3];
}

FrameMoments frame_moments_scalar(const double* v, const float* t, const double* gx,
                                  const double* gy, const double* gz, const double* colcoord,
                                  const double* rowcoord, double du, double dv, int h, int w,
                                  double tau, double scale) {
  double lacc[4] = {};
  double sacc[3][4] = {};
  double aacc[3][4] = {};
  double bacc[3][4] = {};
  std::size_t p = 0;
  for (int r = 0; r < h; ++r) {
    const double beta = dv + rowcoord[r];
    for (int c = 0; c < w; ++c, ++p) {
      const double alpha = du + colcoord[c];
      double lp, s[3], a[3], b[3];
      detail::moment_pixel(v[p], static_cast<double>(t[p]), gx[p], gy[p], gz[p], alpha, beta,
                           tau, scale, lp, s, a, b);
      const std::size_t k = p & 3;
      lacc[k] += lp;
      for (int d = 0; d < 3; ++d) {
        sacc[d][k] += s[d];
        aacc[d][k] += a[d];
        bacc[d][k] += b[d];
      }
    }
  }
  FrameMoments m;
  m.loss = ((lacc[0] + lacc[1]) + lacc[2]) + lacc[3];
  for (int d = 0; d < 3; ++d) {
    m.sum[d] = ((sacc[d][0] + sacc[d][1]) + sacc[d][2]) + sacc[d][3];
    m.asum[d] = ((aacc[d][0] + aacc[d][1]) + aacc[d][2]) + aacc[d][3];
    m.bsum[d] = ((bacc[d][0] + bacc[d][1]) + bacc[d][2]) + bacc[d][3];
  }
  return m;
}

void axpy_f32_scalar(float* y, const float* x, float a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void capsule_max_run_scalar(float* out, int n, double x0, double dx, double y, double z,
                            double ax, double ay, double az, double bx, double by, double bz,
                            double r0, double r1) {
  const double ex = bx - ax, ey = by - ay, ez = bz - az;
  const double len2 = ex * ex + ey * ey + ez * ez;
  const double inv_len2 = len2 > 0.0 ? 1.0 / len2 : 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = x0 + static_cast<double>(i) * dx;
    const float f = static_cast<float>(
        detail::capsule_point(x, y, z, ax, ay, az, ex, ey, ez, inv_len2, r0, r1));
    out[i] = out[i] > f ? out[i] : f;  // VMAXPS operand order
  }
}

}  // namespace

const KernelOps& scalar_ops() {
  static const KernelOps k = {
      "scalar",
      trilinear_batch_scalar,
      clamped_mse_scalar,
      frame_moments_scalar,
      axpy_f32_scalar,
      capsule_max_run_scalar,
  };
  return k;
}

}  // namespace vcreg::kernels
