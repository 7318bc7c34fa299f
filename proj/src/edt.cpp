#include "vcreg/edt.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "vcreg/errors.hpp"

// Signed distance to the set of boundary face midpoints (faces between
// voxels of opposite class). Computed exactly: for each of the three face
// orientations, a separable squared-distance transform runs one lower
// envelope sweep per axis; the sweep along the face normal uses site
// abscissae shifted half a voxel. The three fields are combined by min.

namespace vcreg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (q - x_s)^2 + f_s at arbitrary strictly
// increasing abscissae x_s; evaluated at ascending queries q.
struct Envelope {
  std::vector<double> sx, sf;
  std::vector<int> v;
  std::vector<double> z;

  void reset() {
    sx.clear();
    sf.clear();
  }
  void add_site(double x, double f) {
    if (f < kInf) {
      sx.push_back(x);
      sf.push_back(f);
    }
  }

  void run(const double* q, int nq, double* out) {
    const int m = static_cast<int>(sx.size());
    if (m == 0) {
      for (int a = 0; a < nq; ++a) out[a] = kInf;
      return;
    }
    v.assign(m, 0);
    z.assign(m + 1, 0.0);
    int k = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int s = 1; s < m; ++s) {
      double inter;
      for (;;) {
        const int p = v[k];
        inter = ((sf[s] + sx[s] * sx[s]) - (sf[p] + sx[p] * sx[p])) /
                (2.0 * sx[s] - 2.0 * sx[p]);
        if (inter <= z[k])
          --k;
        else
          break;
      }
      ++k;
      v[k] = s;
      z[k] = inter;
      z[k + 1] = kInf;
    }
    int j = 0;
    for (int a = 0; a < nq; ++a) {
      while (z[j + 1] < q[a]) ++j;
      const double d = q[a] - sx[v[j]];
      out[a] = d * d + sf[v[j]];
    }
  }
};

struct RowWalker {
  int len;
  std::size_t stride;
  std::size_t n_rows;
  std::size_t outer_stride_a, outer_stride_b;
  int outer_len_a, outer_len_b;

  RowWalker(const std::array<int, 3>& dims, int axis) {
    const std::size_t st[3] = {1, static_cast<std::size_t>(dims[0]),
                               static_cast<std::size_t>(dims[0]) * dims[1]};
    len = dims[axis];
    stride = st[axis];
    const int oa = (axis + 1) % 3, ob = (axis + 2) % 3;
    outer_len_a = dims[oa];
    outer_len_b = dims[ob];
    outer_stride_a = st[oa];
    outer_stride_b = st[ob];
    n_rows = static_cast<std::size_t>(outer_len_a) * outer_len_b;
  }

  template <typename F>
  void for_each_row(F&& f) const {
    for (int b = 0; b < outer_len_b; ++b)
      for (int a = 0; a < outer_len_a; ++a)
        f(outer_stride_a * a + outer_stride_b * b);
  }
};

// Squared distance from every voxel center to the nearest face midpoint with
// normal along face_axis, written into dsq.
void face_axis_transform(const Volume3D& mask, int face_axis, std::vector<double>& dsq) {
  const auto& dims = mask.dims;
  const auto& sp = mask.spacing;
  Envelope env;
  std::vector<double> q, scratch;

  // Sweep 1, along the face normal: sites at half-integer positions wherever
  // the mask changes between neighbors.
  {
    const RowWalker rw(dims, face_axis);
    q.resize(rw.len);
    for (int i = 0; i < rw.len; ++i) q[i] = i * sp[face_axis];
    rw.for_each_row([&](std::size_t base) {
      env.reset();
      for (int i = 0; i + 1 < rw.len; ++i) {
        const float a = mask.data[base + rw.stride * i];
        const float b = mask.data[base + rw.stride * (i + 1)];
        if (a != b) env.add_site((i + 0.5) * sp[face_axis], 0.0);
      }
      scratch.resize(rw.len);
      env.run(q.data(), rw.len, scratch.data());
      for (int i = 0; i < rw.len; ++i) dsq[base + rw.stride * i] = scratch[i];
    });
  }

  // Sweeps 2 and 3, across the other axes: sites and queries share the voxel
  // center lattice, costs carried in from the previous sweep.
  for (int step = 1; step < 3; ++step) {
    const int axis = (face_axis + step) % 3;
    const RowWalker rw(dims, axis);
    q.resize(rw.len);
    for (int i = 0; i < rw.len; ++i) q[i] = i * sp[axis];
    std::vector<double> row(rw.len);
    rw.for_each_row([&](std::size_t base) {
      env.reset();
      for (int i = 0; i < rw.len; ++i) {
        row[i] = dsq[base + rw.stride * i];
        env.add_site(q[i], row[i]);
      }
      scratch.resize(rw.len);
      env.run(q.data(), rw.len, scratch.data());
      for (int i = 0; i < rw.len; ++i) dsq[base + rw.stride * i] = scratch[i];
    });
  }
}

}  // namespace

Volume3D distance_transform(const Volume3D& mask, const SdfConvention&) {
  mask.validate();
  bool any0 = false, any1 = false;
  for (float f : mask.data) {
    if (f == 0.0f)
      any0 = true;
    else if (f == 1.0f)
      any1 = true;
    else
      throw DataError("mask is not binary: voxel values must be exactly 0 or 1");
  }
  if (!any0 || !any1) throw DataError("degenerate mask: both classes must be present");

  const std::size_t n = mask.size();
  std::vector<double> best(n, kInf), work(n);
  for (int face_axis = 0; face_axis < 3; ++face_axis) {
    face_axis_transform(mask, face_axis, work);
    for (std::size_t i = 0; i < n; ++i) best[i] = std::min(best[i], work[i]);
  }

  Volume3D out = mask;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::sqrt(best[i]);
    out.data[i] = static_cast<float>(mask.data[i] == 1.0f ? d : -d);
  }
  return out;
}

}  // namespace vcreg
