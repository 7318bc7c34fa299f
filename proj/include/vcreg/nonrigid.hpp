#pragma once

#include <cstdint>
#include <vector>

#include "vcreg/bspline.hpp"
#include "vcreg/catheter_geometry.hpp"
#include "vcreg/rigid.hpp"
#include "vcreg/transforms.hpp"
#include "vcreg/volume.hpp"

// Differentiable refinement of the virtual catheter path: cumulative
// B-spline stretch and twist plus in-plane displacement control points,
// fitted with Adam against the clamped-MSE loss between the swept volume
// cross-sections and the target pullback.

namespace vcreg {

struct DeformationParams {
  std::vector<double> x_s;       // m_long - 1 relative stretch offsets
  std::vector<double> x_theta;   // m_rot - 1 relative twist offsets, radians
  std::vector<double> p_u, p_v;  // m_trans transverse control points, mm
};

struct OptimizerConfig {
  int m_long = 30, m_rot = 20, m_trans = 60;  // control-point counts
  double lr_long = 0.001;                     // stretch learning rate
  double lr_rot = 0.01, lr_trans = 0.01;
  int epochs = 200;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;  // Adam moment settings
  double max_rel = 0.35;      // stretch-control clamp, fraction of the control gap
  double smooth_sigma = 1.0;  // target pre-smoothing along the frame axis
  int smooth_ksize = 5;
};

// Per-frame curves derived from the parameters.
struct DeformationCurves {
  std::vector<double> s, theta, du, dv;
  std::vector<std::uint8_t> active_s;  // stretch controls still inside the clamp band
};

// Mean squared difference between two pullbacks after clamping both into
// [0, tau], over pixels of mutually valid frames. Throws DataError on shape
// mismatch or when no mutually valid frame exists.
double pullback_loss(const PullbackGrid& moving, const PullbackGrid& target,
                     double tau = SdfConvention{}.tau);

// One registration problem: the (cropped) centerline the catheter lives on,
// the volume field it sweeps, the matching target pullback (smoothed once
// and clamped at construction), and the rigid twist offset folded into
// theta. The volume must outlive the problem.
class NonrigidProblem {
 public:
  NonrigidProblem(Centerline c, const Volume3D& vol, const PullbackGrid& target,
                  double rigid_angle, const OptimizerConfig& cfg);

  int n_frames() const { return target_.n_frames; }
  const OptimizerConfig& config() const { return cfg_; }
  double rigid_angle() const { return rigid_angle_; }
  const PullbackGrid& target() const { return target_; }  // smoothed + clamped
  const Centerline& centerline() const { return cl_; }

  DeformationParams zero_params() const;
  DeformationCurves derive_curves(const DeformationParams& p) const;

  // Loss at p; frame orientations re-derived by parallel transport from p's
  // own stretch curve. Optionally returns the frame chain.
  double loss(const DeformationParams& p, FrameSet* frames_out = nullptr) const;

  // Loss at p with frame orientations held at those induced by ref (frame
  // positions still follow p's stretch). This is the function the analytic
  // gradient differentiates exactly: the orientation transport chain is
  // treated as constant within one optimizer step.
  double loss_frozen(const DeformationParams& p, const DeformationParams& ref) const;

  // Analytic gradient at p; overwrites g and returns the loss.
  double gradients(const DeformationParams& p, DeformationParams& g) const;

 private:
  FrameSet frames_at(const DeformationCurves& cur, const FrameSet* orient) const;
  double loss_of_frames(const FrameSet& f) const;

  Centerline cl_;
  const Volume3D* vol_;
  PullbackGrid target_;
  SamplingGridSpec spec_;
  double rigid_angle_ = 0.0;
  OptimizerConfig cfg_;
  double tau_ = SdfConvention{}.tau;
  FrameSet f_init_;
  BsplineBasis b_long_, b_rot_, b_trans_;
  std::vector<double> greville_;
  std::vector<double> colcoord_, rowcoord_;  // pixel offsets from the frame center, mm
  int n_valid_ = 0;

  // sampling scratch, reused between iterations
  mutable std::vector<double> val_, gx_, gy_, gz_;
};

struct RegistrationResult {
  CropIndices crop;       // filled by the calling pipeline
  double rigid_angle = 0.0;
  FrameSet frames;        // frame chain at the returned parameters
  DeformationParams params;
  std::vector<double> loss_history;      // one entry per epoch, pre-update loss
  std::vector<std::uint8_t> s_monotone;  // per-epoch monotonicity audit
  double final_loss = 0.0;               // loss at the returned parameters
  int best_iteration = -1;               // -1 when epochs == 0
};

// Adam descent from zero parameters; per-group learning rates; returns the
// best-loss iterate seen, not the last. Deterministic for fixed inputs.
// Throws NumericalError (with iteration index and a parameter snapshot) if
// the loss turns non-finite.
RegistrationResult optimize(const NonrigidProblem& prob);

}  // namespace vcreg
