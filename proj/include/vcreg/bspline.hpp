#pragma once

#include <cstdint>
#include <vector>

// Cubic clamped B-spline machinery for the deformation model: a basis
// precomputed at fixed frame parameters, Greville control sites for exact
// affine reproduction, and the cumulative (running-sum) control-point
// parametrization with banded clamping.

namespace vcreg {

enum class ControlRole { longitudinal, rotational, transverse_u, transverse_v };

struct ControlVector {
  std::vector<double> p;
  ControlRole role = ControlRole::longitudinal;

  // Longitudinal controls must be strictly increasing.
  void validate() const;
};

// Rows are evaluation parameters, columns control points. Cubic locality
// keeps at most 4 nonzero entries per row, stored banded.
class BsplineBasis {
 public:
  int rows() const { return static_cast<int>(first_col_.size()); }
  int cols() const { return m_; }

  std::vector<double> apply(const std::vector<double>& p) const;
  // g_p += B^T g_rows (the derivative of apply w.r.t. p is exactly B).
  void apply_transpose(const std::vector<double>& g_rows, std::vector<double>& g_p) const;

  double entry(int row, int col) const;

 private:
  friend BsplineBasis build_basis(const std::vector<double>& eval_params, int m);
  int m_ = 0;
  std::vector<double> knots_;
  std::vector<int> first_col_;   // per row
  std::vector<double> weights_;  // per row, 4 consecutive columns
};

// Open-uniform (clamped) cubic basis over [0,1]; endpoints interpolate the
// first and last control point. m >= 4; eval_params nondecreasing in [0,1]
// (small end excursions are evaluated by the boundary spans).
BsplineBasis build_basis(const std::vector<double>& eval_params, int m);

// Control abscissae whose spline reproduces the identity: sum_j N_j(u) g_j
// = u. Used as the initial longitudinal control vector.
std::vector<double> greville_abscissae(int m);

struct CumulativeControls {
  std::vector<double> p;            // p_init + clamped running sums
  std::vector<std::uint8_t> active; // per control: clamp sub-derivative is 1
};

// Offsets accumulate along the chain: control j moves by the sum of
// x[0..j-1], clamped to +-max_rel times the smaller neighboring gap of
// p_init (the gap beyond the last control counts as infinite). Control 0
// never moves. With clamp=false the band is infinite (rotational and
// transverse roles).
CumulativeControls cumulative_controls(const std::vector<double>& x,
                                       const std::vector<double>& p_init, double max_rel,
                                       bool clamp);

// Pull a gradient w.r.t. p back to the pre-cumsum offsets x.
std::vector<double> cumulative_controls_backward(const std::vector<double>& g_p,
                                                 const std::vector<std::uint8_t>& active);

}  // namespace vcreg
