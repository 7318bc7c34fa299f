#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "vcreg/kernels/kernels.hpp"
#include "vcreg/vec3.hpp"

// Scalar-field containers and the operations the similarity loss is built
// from: signed distance truncation, inside-lumen clamping, longitudinal
// smoothing, and differentiable trilinear sampling.

namespace vcreg {

// Signed distance fields are positive inside the structure and truncated at
// tau millimeters. Every clamp and loss derives from this one convention.
struct SdfConvention {
  double tau = 2.0;
};

struct Volume3D {
  std::array<int, 3> dims{0, 0, 0};        // voxels per axis
  std::array<double, 3> spacing{1, 1, 1};  // mm per voxel
  Vec3 origin{0, 0, 0};                    // center of voxel (0,0,0), mm
  std::vector<float> data;                 // x-fastest

  std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
  }
  float at(int i, int j, int k) const { return data[index(i, j, k)]; }
  float& at(int i, int j, int k) { return data[index(i, j, k)]; }
  Vec3 voxel_center(int i, int j, int k) const {
    return {origin.x + i * spacing[0], origin.y + j * spacing[1], origin.z + k * spacing[2]};
  }

  // Throws DataError on dims < 2 per axis, non-positive spacing, or a data
  // length that does not match dims.
  void validate() const;

  kernels::VolumeView view(double background = 0.0) const;
};

// A stack of resampled cross-sections, either acquired (the target pullback)
// or produced by sweeping a candidate catheter path through a volume.
struct PullbackGrid {
  int n_frames = 0;
  int height = 96, width = 96;
  double in_plane_spacing = 0.080;  // mm per pixel
  double frame_spacing = 0.4;       // mm between consecutive frames
  std::vector<float> data;          // n_frames * height * width, row-major
  std::vector<std::uint8_t> valid;  // frames usable in a loss

  std::size_t frame_pixels() const {
    return static_cast<std::size_t>(height) * width;
  }
  float* frame(int i) { return data.data() + frame_pixels() * i; }
  const float* frame(int i) const { return data.data() + frame_pixels() * i; }

  void validate() const;
};

// Elementwise min(x, tau).
Volume3D truncate(const Volume3D& sdf, double tau);

// Elementwise min(max(x, 0), tau). Sub-derivative contract for the loss:
// 1 on the open interval (0, tau), 0 elsewhere.
Volume3D clamp_inside(const Volume3D& field, double tau);
PullbackGrid clamp_inside(const PullbackGrid& field, double tau);
inline double clamp_inside(double x, double tau) {
  return x < 0.0 ? 0.0 : (x > tau ? tau : x);
}

// Per-pixel-column Gaussian smoothing along the frame axis. Boundary frames
// use mirrored taps; invalid frames are dropped from both the weighted sum
// and its normalizer. ksize must be odd; sigma <= 0 degenerates to identity.
PullbackGrid gaussian_smooth_longitudinal(const PullbackGrid& p, double sigma_frames,
                                          int ksize);

// Trilinear interpolation at physical points with the exact interpolant
// derivative. Outside the voxel-center bounding box the background value is
// returned with zero gradient. grads may be null.
void sample_trilinear(const Volume3D& vol, const std::vector<Vec3>& points,
                      std::vector<double>& values, std::vector<Vec3>* grads,
                      double background = 0.0);

}  // namespace vcreg
