#pragma once

#include <cstdint>
#include <vector>

#include "vcreg/volume.hpp"

// Rigid initialization: longitudinal crop alignment of two pullbacks from
// their lumen area curves, and rotational alignment from wall-thickness
// matrices. Both are exhaustive argmin searches with deterministic
// tie-breaking, so repeated runs give identical indices.

namespace vcreg {

// Half-open frame ranges [start, end) describing the common segment of the
// two pullbacks. Overlap lengths are equal by construction.
struct CropIndices {
  int ct_start = 0, ct_end = 0;
  int oct_start = 0, oct_end = 0;

  int length() const { return ct_end - ct_start; }
};

// Per-frame lumen cross-section areas, mm^2. Frames marked invalid carry a
// zero area and are excluded from every alignment score.
struct AreaVector {
  std::vector<double> area;
  std::vector<std::uint8_t> valid;

  int size() const { return static_cast<int>(area.size()); }
};

// Wall thickness sampled along gamma equally spaced radial rays per frame,
// mm. Row i is frame i; column k is the ray at angle 2*pi*k/gamma measured
// from the U axis toward the V axis. Empty or invalid frames carry a zero
// row and a cleared flag.
struct ThicknessMatrix {
  int n = 0;
  int gamma = 30;
  std::vector<double> H;  // n * gamma, row-major
  std::vector<std::uint8_t> valid;

  double at(int i, int k) const { return H[static_cast<std::size_t>(i) * gamma + k]; }
  double& at(int i, int k) { return H[static_cast<std::size_t>(i) * gamma + k]; }
};

// Area of the positive (inside-lumen) region per frame:
// (#pixels > 0) * in_plane_spacing^2.
AreaVector area_vector(const PullbackGrid& lumen);

// Slides one area curve over the other through every integer shift, scoring
// each placement by the mean squared area difference over the overlap;
// frames invalid in either curve are excluded from the mean. Only shifts
// with at least min_overlap scored frames compete. Ties prefer the smallest
// shift magnitude, then the negative one. Throws DataError when either
// curve is shorter than min_overlap or no shift reaches it.
CropIndices long_reg(const AreaVector& a_ct, const AreaVector& a_oct, int min_overlap = 40);

// Wall thickness per frame: from the centroid of the positive pixels, gamma
// rays are marched in half-pixel steps to the frame border; each ray's entry
// is the length of ray covered by positive pixels. Frames with no positive
// pixel (or marked invalid) get a zero row and a cleared flag.
ThicknessMatrix thickness_matrix(const PullbackGrid& wall, int gamma = 30);

// Evaluates all gamma circular column shifts of h_ct against h_oct over the
// frames valid in both, returning the angle 2*pi*k/gamma of the MSE argmin;
// ties prefer the smallest angle. The result is the twist to apply to the
// frames h_ct was sampled with so its rays line up with h_oct's. Angular
// resolution is exactly 2*pi/gamma. Throws DataError on mismatched shapes
// or fewer than 5 common valid frames.
double rot_reg(const ThicknessMatrix& h_ct, const ThicknessMatrix& h_oct);

}  // namespace vcreg
