#pragma once

#include <vector>

#include "vcreg/catheter_geometry.hpp"
#include "vcreg/volume.hpp"

// The three catheter transforms (stretch, twist, in-plane displacement),
// their fixed-order composition, and curved-planar sampling of a volume
// along the resulting frame chain.

namespace vcreg {

// Cross-section geometry of sampled frames. Must match the target pullback
// exactly; the catheter pierces each frame at the exact pixel center
// (w/2 - 0.5, h/2 - 0.5), columns along U, rows along V.
struct SamplingGridSpec {
  int height = 96, width = 96;
  double in_plane_spacing = 0.080;  // mm per pixel
  double frame_spacing = 0.4;       // mm between frames, carried to outputs

  double center_col() const { return width / 2.0 - 0.5; }
  double center_row() const { return height / 2.0 - 0.5; }

  static SamplingGridSpec like(const PullbackGrid& g) {
    return {g.height, g.width, g.in_plane_spacing, g.frame_spacing};
  }
};

// Longitudinal stretch: move frames to new arclength positions and rebuild
// poses by parallel transport (seeded from f's first frame).
FrameSet phi_long(const FrameSet& f, const std::vector<double>& s, const Centerline& c);

// Twist: rotate U, V about the tangent by theta_i per frame.
FrameSet phi_rot(FrameSet f, const std::vector<double>& theta);

// Bend: displace each frame center within its own plane.
FrameSet phi_trans(FrameSet f, const std::vector<double>& d_u,
                   const std::vector<double>& d_v);

// phi_trans ∘ phi_rot ∘ phi_long, the fixed composition order.
FrameSet compose(const FrameSet& f, const std::vector<double>& s,
                 const std::vector<double>& theta, const std::vector<double>& d_u,
                 const std::vector<double>& d_v, const Centerline& c);

// Sweep the frame chain through a volume, one resampled cross-section per
// frame. Out-of-volume pixels read the background value 0.
PullbackGrid virtual_catheter_sample(const FrameSet& f, const Volume3D& vol,
                                     const SamplingGridSpec& spec);

// Same sweep in double precision, also writing per-pixel spatial gradients
// (d value / d world point) for the loss backward pass. Buffers are resized
// to n_frames*h*w; layout matches PullbackGrid frame order.
void sample_frames(const FrameSet& f, const Volume3D& vol, const SamplingGridSpec& spec,
                   std::vector<double>& values, std::vector<double>& gx,
                   std::vector<double>& gy, std::vector<double>& gz);

}  // namespace vcreg
