#include "kernels_detail.hpp"

// AVX2 kernel variants. Each vector body replays the scalar expression tree in
// kernels_detail.hpp lane for lane: same clamp operand order, same reduction
// striping (lane j holds element indices == j mod 4), no FMA. Tails reuse the
// scalar per-element helpers so the stripe assignment stays index-based.

#if defined(__AVX2__)

#include <immintrin.h>

namespace vcreg::kernels {
namespace {

using detail::moment_pixel;
using detail::trilinear_one;

inline __m256d clamp4(__m256d x, __m256d lo, __m256d hi) {
  return _mm256_min_pd(_mm256_max_pd(x, lo), hi);
}

inline double hsum_stripes(__m256d acc) {
  alignas(32) double a[4];
  _mm256_store_pd(a, acc);
  return ((a[0] + a[1]) + a[2]) + a[3];
}

void trilinear_batch_avx2(const VolumeView& vol, const double* px, const double* py,
                          const double* pz, std::size_t n, double* val, double* gx,
                          double* gy, double* gz) {
  const bool want_grad = gx != nullptr;
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d oxv = _mm256_set1_pd(vol.ox);
  const __m256d oyv = _mm256_set1_pd(vol.oy);
  const __m256d ozv = _mm256_set1_pd(vol.oz);
  const __m256d isx = _mm256_set1_pd(vol.inv_sx);
  const __m256d isy = _mm256_set1_pd(vol.inv_sy);
  const __m256d isz = _mm256_set1_pd(vol.inv_sz);
  const __m256d hxv = _mm256_set1_pd(static_cast<double>(vol.nx - 1));
  const __m256d hyv = _mm256_set1_pd(static_cast<double>(vol.ny - 1));
  const __m256d hzv = _mm256_set1_pd(static_cast<double>(vol.nz - 1));
  const __m256d bgv = _mm256_set1_pd(vol.background);
  const __m128i mxv = _mm_set1_epi32(vol.nx - 2);
  const __m128i myv = _mm_set1_epi32(vol.ny - 2);
  const __m128i mzv = _mm_set1_epi32(vol.nz - 2);
  const __m128i nxv = _mm_set1_epi32(vol.nx);
  const __m128i nyv = _mm_set1_epi32(vol.ny);
  const int dy = vol.nx;
  const int dz = vol.nx * vol.ny;

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d lx = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(px + i), oxv), isx);
    const __m256d ly = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(py + i), oyv), isy);
    const __m256d lz = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(pz + i), ozv), isz);

    __m256d inside = _mm256_and_pd(_mm256_cmp_pd(lx, zero, _CMP_GE_OQ),
                                   _mm256_cmp_pd(lx, hxv, _CMP_LE_OQ));
    inside = _mm256_and_pd(inside, _mm256_and_pd(_mm256_cmp_pd(ly, zero, _CMP_GE_OQ),
                                                 _mm256_cmp_pd(ly, hyv, _CMP_LE_OQ)));
    inside = _mm256_and_pd(inside, _mm256_and_pd(_mm256_cmp_pd(lz, zero, _CMP_GE_OQ),
                                                 _mm256_cmp_pd(lz, hzv, _CMP_LE_OQ)));

    const __m256d cx = clamp4(lx, zero, hxv);
    const __m256d cy = clamp4(ly, zero, hyv);
    const __m256d cz = clamp4(lz, zero, hzv);
    const __m128i ix = _mm_min_epi32(_mm256_cvttpd_epi32(cx), mxv);
    const __m128i iy = _mm_min_epi32(_mm256_cvttpd_epi32(cy), myv);
    const __m128i iz = _mm_min_epi32(_mm256_cvttpd_epi32(cz), mzv);
    const __m256d fx = _mm256_sub_pd(cx, _mm256_cvtepi32_pd(ix));
    const __m256d fy = _mm256_sub_pd(cy, _mm256_cvtepi32_pd(iy));
    const __m256d fz = _mm256_sub_pd(cz, _mm256_cvtepi32_pd(iz));

    const __m128i base =
        _mm_add_epi32(ix, _mm_mullo_epi32(nxv, _mm_add_epi32(iy, _mm_mullo_epi32(nyv, iz))));
    const __m128i i100 = _mm_add_epi32(base, _mm_set1_epi32(1));
    const __m128i i010 = _mm_add_epi32(base, _mm_set1_epi32(dy));
    const __m128i i110 = _mm_add_epi32(base, _mm_set1_epi32(dy + 1));
    const __m128i i001 = _mm_add_epi32(base, _mm_set1_epi32(dz));
    const __m128i i101 = _mm_add_epi32(base, _mm_set1_epi32(dz + 1));
    const __m128i i011 = _mm_add_epi32(base, _mm_set1_epi32(dy + dz));
    const __m128i i111 = _mm_add_epi32(base, _mm_set1_epi32(dy + dz + 1));

    const float* d = vol.data;
    const __m256d c000 = _mm256_cvtps_pd(_mm_i32gather_ps(d, base, 4));
    const __m256d c100 = _mm256_cvtps_pd(_mm_i32gather_ps(d, i100, 4));
    const __m256d c010 = _mm256_cvtps_pd(_mm_i32gather_ps(d, i010, 4));
    const __m256d c110 = _mm256_cvtps_pd(_mm_i32gather_ps(d, i110, 4));
    const __m256d c001 = _mm256_cvtps_pd(_mm_i32gather_ps(d, i001, 4));
    const __m256d c101 = _mm256_cvtps_pd(_mm_i32gather_ps(d, i101, 4));
    const __m256d c011 = _mm256_cvtps_pd(_mm_i32gather_ps(d, i011, 4));
    const __m256d c111 = _mm256_cvtps_pd(_mm_i32gather_ps(d, i111, 4));

    const __m256d c00 = _mm256_add_pd(c000, _mm256_mul_pd(fx, _mm256_sub_pd(c100, c000)));
    const __m256d c10 = _mm256_add_pd(c010, _mm256_mul_pd(fx, _mm256_sub_pd(c110, c010)));
    const __m256d c01 = _mm256_add_pd(c001, _mm256_mul_pd(fx, _mm256_sub_pd(c101, c001)));
    const __m256d c11 = _mm256_add_pd(c011, _mm256_mul_pd(fx, _mm256_sub_pd(c111, c011)));
    const __m256d c0 = _mm256_add_pd(c00, _mm256_mul_pd(fy, _mm256_sub_pd(c10, c00)));
    const __m256d c1 = _mm256_add_pd(c01, _mm256_mul_pd(fy, _mm256_sub_pd(c11, c01)));
    const __m256d out = _mm256_add_pd(c0, _mm256_mul_pd(fz, _mm256_sub_pd(c1, c0)));
    _mm256_storeu_pd(val + i, _mm256_blendv_pd(bgv, out, inside));

    if (want_grad) {
      const __m256d wx0 = _mm256_sub_pd(one, fx), wx1 = fx;
      const __m256d wy0 = _mm256_sub_pd(one, fy), wy1 = fy;
      const __m256d wz0 = _mm256_sub_pd(one, fz), wz1 = fz;

      const __m256d w00 = _mm256_mul_pd(wy0, wz0), w10 = _mm256_mul_pd(wy1, wz0);
      const __m256d w01 = _mm256_mul_pd(wy0, wz1), w11 = _mm256_mul_pd(wy1, wz1);
      const __m256d gxl = _mm256_add_pd(
          _mm256_add_pd(_mm256_mul_pd(_mm256_sub_pd(c100, c000), w00),
                        _mm256_mul_pd(_mm256_sub_pd(c110, c010), w10)),
          _mm256_add_pd(_mm256_mul_pd(_mm256_sub_pd(c101, c001), w01),
                        _mm256_mul_pd(_mm256_sub_pd(c111, c011), w11)));

      const __m256d u00 = _mm256_mul_pd(wx0, wz0), u10 = _mm256_mul_pd(wx1, wz0);
      const __m256d u01 = _mm256_mul_pd(wx0, wz1), u11 = _mm256_mul_pd(wx1, wz1);
      const __m256d gyl = _mm256_add_pd(
          _mm256_add_pd(_mm256_mul_pd(_mm256_sub_pd(c010, c000), u00),
                        _mm256_mul_pd(_mm256_sub_pd(c110, c100), u10)),
          _mm256_add_pd(_mm256_mul_pd(_mm256_sub_pd(c011, c001), u01),
                        _mm256_mul_pd(_mm256_sub_pd(c111, c101), u11)));

      const __m256d s00 = _mm256_mul_pd(wx0, wy0), s10 = _mm256_mul_pd(wx1, wy0);
      const __m256d s01 = _mm256_mul_pd(wx0, wy1), s11 = _mm256_mul_pd(wx1, wy1);
      const __m256d gzl = _mm256_add_pd(
          _mm256_add_pd(_mm256_mul_pd(_mm256_sub_pd(c001, c000), s00),
                        _mm256_mul_pd(_mm256_sub_pd(c101, c100), s10)),
          _mm256_add_pd(_mm256_mul_pd(_mm256_sub_pd(c011, c010), s01),
                        _mm256_mul_pd(_mm256_sub_pd(c111, c110), s11)));

      _mm256_storeu_pd(gx + i, _mm256_blendv_pd(zero, _mm256_mul_pd(gxl, isx), inside));
      _mm256_storeu_pd(gy + i, _mm256_blendv_pd(zero, _mm256_mul_pd(gyl, isy), inside));
      _mm256_storeu_pd(gz + i, _mm256_blendv_pd(zero, _mm256_mul_pd(gzl, isz), inside));
    }
  }
  for (; i < n; ++i) {
    if (want_grad)
      trilinear_one(vol, px[i], py[i], pz[i], val[i], &gx[i], &gy[i], &gz[i]);
    else
      trilinear_one(vol, px[i], py[i], pz[i], val[i], nullptr, nullptr, nullptr);
  }
}

double clamped_mse_avx2(const double* v, const float* t, std::size_t n, double tau) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d tauv = _mm256_set1_pd(tau);
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v4 = _mm256_loadu_pd(v + i);
    const __m256d t4 = _mm256_cvtps_pd(_mm_loadu_ps(t + i));
    const __m256d r = _mm256_sub_pd(clamp4(v4, zero, tauv), t4);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(r, r));
  }
  alignas(32) double a[4];
  _mm256_store_pd(a, acc);
  for (; i < n; ++i) {
    const double cv = detail::vmin(detail::vmax(v[i], 0.0), tau);
    const double r = cv - static_cast<double>(t[i]);
    a[i & 3] += r * r;
  }
  return ((a[0] + a[1]) + a[2]) + a[3];
}

FrameMoments frame_moments_avx2(const double* v, const float* t, const double* gx,
                                const double* gy, const double* gz, const double* colcoord,
                                const double* rowcoord, double du, double dv, int h, int w,
                                double tau, double scale) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d onev = _mm256_set1_pd(1.0);
  const __m256d tauv = _mm256_set1_pd(tau);
  const __m256d scalev = _mm256_set1_pd(scale);
  const __m256d duv = _mm256_set1_pd(du);

  // Memory-resident stripe accumulators let scalar row edges and the vector
  // body share the same storage.
  alignas(32) double lacc[4] = {};
  alignas(32) double sacc[3][4] = {};
  alignas(32) double aacc[3][4] = {};
  alignas(32) double bacc[3][4] = {};

  std::size_t p = 0;
  for (int r = 0; r < h; ++r) {
    const double beta = dv + rowcoord[r];
    const __m256d betav = _mm256_set1_pd(beta);
    int c = 0;
    auto scalar_pixel = [&]() {
      const double alpha = du + colcoord[c];
      double lp, s[3], a[3], b[3];
      moment_pixel(v[p], static_cast<double>(t[p]), gx[p], gy[p], gz[p], alpha, beta, tau,
                   scale, lp, s, a, b);
      const std::size_t k = p & 3;
      lacc[k] += lp;
      for (int d = 0; d < 3; ++d) {
        sacc[d][k] += s[d];
        aacc[d][k] += a[d];
        bacc[d][k] += b[d];
      }
      ++c;
      ++p;
    };
    while (c < w && (p & 3) != 0) scalar_pixel();
    for (; c + 4 <= w; c += 4, p += 4) {
      const __m256d alpha = _mm256_add_pd(duv, _mm256_loadu_pd(colcoord + c));
      const __m256d v4 = _mm256_loadu_pd(v + p);
      const __m256d t4 = _mm256_cvtps_pd(_mm_loadu_ps(t + p));
      const __m256d rr = _mm256_sub_pd(clamp4(v4, zero, tauv), t4);
      const __m256d mask = _mm256_and_pd(_mm256_cmp_pd(v4, zero, _CMP_GT_OQ),
                                         _mm256_cmp_pd(v4, tauv, _CMP_LT_OQ));
      const __m256d m01 = _mm256_and_pd(mask, onev);
      const __m256d wv = _mm256_mul_pd(_mm256_mul_pd(scalev, rr), m01);
      const __m256d ag[3] = {_mm256_mul_pd(wv, _mm256_loadu_pd(gx + p)),
                             _mm256_mul_pd(wv, _mm256_loadu_pd(gy + p)),
                             _mm256_mul_pd(wv, _mm256_loadu_pd(gz + p))};
      _mm256_store_pd(lacc,
                      _mm256_add_pd(_mm256_load_pd(lacc), _mm256_mul_pd(rr, rr)));
      for (int d = 0; d < 3; ++d) {
        _mm256_store_pd(sacc[d], _mm256_add_pd(_mm256_load_pd(sacc[d]), ag[d]));
        _mm256_store_pd(aacc[d], _mm256_add_pd(_mm256_load_pd(aacc[d]),
                                               _mm256_mul_pd(alpha, ag[d])));
        _mm256_store_pd(bacc[d], _mm256_add_pd(_mm256_load_pd(bacc[d]),
                                               _mm256_mul_pd(betav, ag[d])));
      }
    }
    while (c < w) scalar_pixel();
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

void axpy_f32_avx2(float* y, const float* x, float a, std::size_t n) {
  const __m256 av = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 yv = _mm256_loadu_ps(y + i);
    const __m256 xv = _mm256_loadu_ps(x + i);
    _mm256_storeu_ps(y + i, _mm256_add_ps(yv, _mm256_mul_ps(av, xv)));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void capsule_max_run_avx2(float* out, int n, double x0, double dx, double y, double z,
                          double ax, double ay, double az, double bx, double by, double bz,
                          double r0, double r1) {
  const double ex = bx - ax, ey = by - ay, ez = bz - az;
  const double len2 = ex * ex + ey * ey + ez * ez;
  const double inv_len2 = len2 > 0.0 ? 1.0 / len2 : 0.0;

  const __m256d zero = _mm256_setzero_pd();
  const __m256d onev = _mm256_set1_pd(1.0);
  const __m256d x0v = _mm256_set1_pd(x0);
  const __m256d dxv = _mm256_set1_pd(dx);
  const __m256d axv = _mm256_set1_pd(ax);
  const __m256d qy = _mm256_set1_pd(y - ay);
  const __m256d qz = _mm256_set1_pd(z - az);
  const __m256d exv = _mm256_set1_pd(ex);
  const __m256d eyv = _mm256_set1_pd(ey);
  const __m256d ezv = _mm256_set1_pd(ez);
  const __m256d ilv = _mm256_set1_pd(inv_len2);
  const __m256d r0v = _mm256_set1_pd(r0);
  const __m256d drv = _mm256_set1_pd(r1 - r0);
  const __m128i step = _mm_setr_epi32(0, 1, 2, 3);

  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d di = _mm256_cvtepi32_pd(_mm_add_epi32(_mm_set1_epi32(i), step));
    const __m256d x = _mm256_add_pd(x0v, _mm256_mul_pd(di, dxv));
    const __m256d qx = _mm256_sub_pd(x, axv);
    const __m256d tr = _mm256_mul_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(qx, exv), _mm256_mul_pd(qy, eyv)),
                      _mm256_mul_pd(qz, ezv)),
        ilv);
    const __m256d tc = clamp4(tr, zero, onev);
    const __m256d px = _mm256_sub_pd(qx, _mm256_mul_pd(tc, exv));
    const __m256d py = _mm256_sub_pd(qy, _mm256_mul_pd(tc, eyv));
    const __m256d pz = _mm256_sub_pd(qz, _mm256_mul_pd(tc, ezv));
    const __m256d dist = _mm256_sqrt_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(px, px), _mm256_mul_pd(py, py)),
                      _mm256_mul_pd(pz, pz)));
    const __m256d sdf = _mm256_sub_pd(_mm256_add_pd(r0v, _mm256_mul_pd(tc, drv)), dist);
    const __m128 f = _mm256_cvtpd_ps(sdf);
    const __m128 o = _mm_loadu_ps(out + i);
    _mm_storeu_ps(out + i, _mm_max_ps(o, f));
  }
  for (; i < n; ++i) {
    const double x = x0 + static_cast<double>(i) * dx;
    const float f = static_cast<float>(
        detail::capsule_point(x, y, z, ax, ay, az, ex, ey, ez, inv_len2, r0, r1));
    out[i] = out[i] > f ? out[i] : f;
  }
}

const KernelOps avx2_table = {
    "avx2",
    trilinear_batch_avx2,
    clamped_mse_avx2,
    frame_moments_avx2,
    axpy_f32_avx2,
    capsule_max_run_avx2,
};

}  // namespace

const KernelOps* avx2_ops() {
  return __builtin_cpu_supports("avx2") ? &avx2_table : nullptr;
}

}  // namespace vcreg::kernels

#else  // !defined(__AVX2__)

namespace vcreg::kernels {
const KernelOps* avx2_ops() { return nullptr; }
}  // namespace vcreg::kernels

#endif
