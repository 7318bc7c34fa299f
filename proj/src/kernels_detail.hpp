#pragma once

#include "vcreg/kernels/kernels.hpp"

#include <cmath>

// Per-element reference operations shared by the scalar kernels and the AVX2
// tail loops. Operation order here is the bit-identity contract between the
// two backends; any edit must be mirrored in the vector bodies.

namespace vcreg::kernels::detail {

// Same operand semantics as VMINPD/VMAXPD (second operand wins on ties and
// NaN), so scalar and vector clamps agree even on signed zeros.
inline double vmin(double a, double b) { return a < b ? a : b; }
inline double vmax(double a, double b) { return a > b ? a : b; }

inline void trilinear_one(const VolumeView& v, double x, double y, double z, double& val,
                          double* gx, double* gy, double* gz) {
  const double lx = (x - v.ox) * v.inv_sx;
  const double ly = (y - v.oy) * v.inv_sy;
  const double lz = (z - v.oz) * v.inv_sz;
  const double hx = static_cast<double>(v.nx - 1);
  const double hy = static_cast<double>(v.ny - 1);
  const double hz = static_cast<double>(v.nz - 1);
  const bool inside = lx >= 0.0 && lx <= hx && ly >= 0.0 && ly <= hy && lz >= 0.0 && lz <= hz;

  // Clamp before index math so out-of-range points (reported as background)
  // still gather valid corners; in SIMD those lanes run unconditionally.
  const double cx = vmin(vmax(lx, 0.0), hx);
  const double cy = vmin(vmax(ly, 0.0), hy);
  const double cz = vmin(vmax(lz, 0.0), hz);
  int ix = static_cast<int>(cx);
  int iy = static_cast<int>(cy);
  int iz = static_cast<int>(cz);
  ix = ix < v.nx - 2 ? ix : v.nx - 2;
  iy = iy < v.ny - 2 ? iy : v.ny - 2;
  iz = iz < v.nz - 2 ? iz : v.nz - 2;
  const double fx = cx - static_cast<double>(ix);
  const double fy = cy - static_cast<double>(iy);
  const double fz = cz - static_cast<double>(iz);

  const int base = ix + v.nx * (iy + v.ny * iz);
  const int dy = v.nx;
  const int dz = v.nx * v.ny;
  const double c000 = v.data[base];
  const double c100 = v.data[base + 1];
  const double c010 = v.data[base + dy];
  const double c110 = v.data[base + dy + 1];
  const double c001 = v.data[base + dz];
  const double c101 = v.data[base + dz + 1];
  const double c011 = v.data[base + dy + dz];
  const double c111 = v.data[base + dy + dz + 1];

  const double c00 = c000 + fx * (c100 - c000);
  const double c10 = c010 + fx * (c110 - c010);
  const double c01 = c001 + fx * (c101 - c001);
  const double c11 = c011 + fx * (c111 - c011);
  const double c0 = c00 + fy * (c10 - c00);
  const double c1 = c01 + fy * (c11 - c01);
  const double out = c0 + fz * (c1 - c0);
  val = inside ? out : v.background;

  if (gx != nullptr) {
    const double wx0 = 1.0 - fx, wx1 = fx;
    const double wy0 = 1.0 - fy, wy1 = fy;
    const double wz0 = 1.0 - fz, wz1 = fz;
    const double w00 = wy0 * wz0, w10 = wy1 * wz0, w01 = wy0 * wz1, w11 = wy1 * wz1;
    const double gxl = ((c100 - c000) * w00 + (c110 - c010) * w10) +
                       ((c101 - c001) * w01 + (c111 - c011) * w11);
    const double u00 = wx0 * wz0, u10 = wx1 * wz0, u01 = wx0 * wz1, u11 = wx1 * wz1;
    const double gyl = ((c010 - c000) * u00 + (c110 - c100) * u10) +
                       ((c011 - c001) * u01 + (c111 - c101) * u11);
    const double s00 = wx0 * wy0, s10 = wx1 * wy0, s01 = wx0 * wy1, s11 = wx1 * wy1;
    const double gzl = ((c001 - c000) * s00 + (c101 - c100) * s10) +
                       ((c011 - c010) * s01 + (c111 - c110) * s11);
    *gx = inside ? gxl * v.inv_sx : 0.0;
    *gy = inside ? gyl * v.inv_sy : 0.0;
    *gz = inside ? gzl * v.inv_sz : 0.0;
  }
}

// One pixel of the loss backward pass. The residual uses the clamped value,
// the mask uses the open interval (0, tau): zero sub-derivative at the edges.
inline void moment_pixel(double v, double t, double gx, double gy, double gz, double alpha,
                         double beta, double tau, double scale, double& loss, double* s,
                         double* a, double* b) {
  const double cv = vmin(vmax(v, 0.0), tau);
  const double r = cv - t;
  loss = r * r;
  const double m = (v > 0.0 && v < tau) ? 1.0 : 0.0;
  const double w = scale * r * m;
  const double ax = w * gx, ay = w * gy, az = w * gz;
  s[0] = ax; s[1] = ay; s[2] = az;
  a[0] = alpha * ax; a[1] = alpha * ay; a[2] = alpha * az;
  b[0] = beta * ax; b[1] = beta * ay; b[2] = beta * az;
}

inline double capsule_point(double x, double y, double z, double ax, double ay, double az,
                            double ex, double ey, double ez, double inv_len2, double r0,
                            double r1) {
  const double qx = x - ax, qy = y - ay, qz = z - az;
  const double tr = (qx * ex + qy * ey + qz * ez) * inv_len2;
  const double tc = vmin(vmax(tr, 0.0), 1.0);
  const double px = qx - tc * ex, py = qy - tc * ey, pz = qz - tc * ez;
  const double d = std::sqrt(px * px + py * py + pz * pz);
  return (r0 + tc * (r1 - r0)) - d;
}

}  // namespace vcreg::kernels::detail
