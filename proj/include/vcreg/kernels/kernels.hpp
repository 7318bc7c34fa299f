#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops: batch trilinear sampling with spatial gradients,
// clamped-MSE reductions, per-frame gradient moments, float axpy for the
// longitudinal smoother, and capsule-field voxel rasterization.
//
// Every kernel has a scalar reference implementation and an AVX2 variant
// selected at runtime. The two are bit-identical by contract: identical
// floating-point operation order per element, reductions striped over four
// accumulators (stripe = element index mod 4) combined left to right, and no
// FMA contraction (see -ffp-contract=off in the top-level build flags).
// Equivalence is asserted in tests/test_kernels.cpp.

namespace vcreg::kernels {

// Raw view of a scalar field on a regular grid, x-fastest layout.
struct VolumeView {
  const float* data = nullptr;
  int nx = 0, ny = 0, nz = 0;
  double ox = 0, oy = 0, oz = 0;     // origin of voxel (0,0,0) center, mm
  double inv_sx = 1, inv_sy = 1, inv_sz = 1;  // 1 / spacing
  double background = 0.0;           // value reported outside the center grid
};

// Per-frame reduction results for the loss backward pass.
// a_p = scale * (clamp(v_p) - t_p) * 1(0 < v_p < tau) * grad_p
//   sum   = sum_p a_p
//   asum  = sum_p (du + colcoord[c]) * a_p
//   bsum  = sum_p (dv + rowcoord[r]) * a_p
//   loss  = sum_p (clamp(v_p) - t_p)^2        (unscaled)
struct FrameMoments {
  double loss = 0;
  double sum[3] = {0, 0, 0};
  double asum[3] = {0, 0, 0};
  double bsum[3] = {0, 0, 0};
};

struct KernelOps {
  const char* name;

  // Trilinear interpolation in physical coordinates; exact interpolant
  // derivative. Outside the voxel-center bounding box: background value,
  // zero gradient. Gradient outputs may be null.
  void (*trilinear_batch)(const VolumeView& vol, const double* px, const double* py,
                          const double* pz, std::size_t n, double* val, double* gx,
                          double* gy, double* gz);

  // sum over pixels of (clamp(v, 0, tau) - t)^2; t is pre-clamped.
  double (*clamped_mse)(const double* v, const float* t, std::size_t n, double tau);

  FrameMoments (*frame_moments)(const double* v, const float* t, const double* gx,
                                const double* gy, const double* gz,
                                const double* colcoord, const double* rowcoord,
                                double du, double dv, int h, int w, double tau,
                                double scale);

  // y += a * x, float32
  void (*axpy_f32)(float* y, const float* x, float a, std::size_t n);

  // out[i] = max(out[i], r(t) - dist((x0 + i*dx, y, z), segment ab)),
  // radius linearly interpolated along the segment parameter.
  void (*capsule_max_run)(float* out, int n, double x0, double dx, double y, double z,
                          double ax, double ay, double az, double bx, double by,
                          double bz, double r0, double r1);
};

// Active backend: AVX2 when the CPU supports it, scalar otherwise.
// Environment override VCREG_SIMD=scalar|avx2 (avx2 silently falls back when
// unsupported).
const KernelOps& ops();

const KernelOps& scalar_ops();
const KernelOps* avx2_ops();  // nullptr when unsupported at runtime

}  // namespace vcreg::kernels
