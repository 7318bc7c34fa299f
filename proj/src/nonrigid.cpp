#include "vcreg/nonrigid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "vcreg/errors.hpp"
#include "vcreg/kernels/kernels.hpp"

namespace vcreg {

namespace {

double dot3(const double a[3], const Vec3& b) { return a[0] * b.x + a[1] * b.y + a[2] * b.z; }

std::string join(const std::vector<double>& v) {
  std::string out = "[";
  char buf[40];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", v[i]);
    out += buf;
    if (i + 1 < v.size()) out += ", ";
  }
  return out + "]";
}

struct AdamState {
  std::vector<double> m, v;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(std::vector<double>& x, const std::vector<double>& g, AdamState& st, double lr,
               double b1, double b2, double eps, int t) {
  const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < x.size(); ++i) {
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * g[i];
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * g[i] * g[i];
    x[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps);
  }
}

}  // namespace

double pullback_loss(const PullbackGrid& moving, const PullbackGrid& target, double tau) {
  if (moving.n_frames != target.n_frames || moving.height != target.height ||
      moving.width != target.width)
    throw DataError("pullback grids disagree in shape");
  if (moving.in_plane_spacing != target.in_plane_spacing ||
      moving.frame_spacing != target.frame_spacing)
    throw DataError("pullback grids disagree in spacing");
  const auto& k = kernels::ops();
  const std::size_t hw = moving.frame_pixels();
  std::vector<double> v(hw);
  std::vector<float> t(hw);
  double sum = 0.0;
  int nv = 0;
  for (int i = 0; i < moving.n_frames; ++i) {
    if (!moving.valid[i] || !target.valid[i]) continue;
    const float* mf = moving.frame(i);
    const float* tf = target.frame(i);
    for (std::size_t p = 0; p < hw; ++p) {
      v[p] = double(mf[p]);
      t[p] = float(clamp_inside(double(tf[p]), tau));
    }
    sum += k.clamped_mse(v.data(), t.data(), hw, tau);
    ++nv;
  }
  if (nv == 0) throw DataError("no mutually valid frames for the pullback loss");
  return sum / (double(nv) * double(hw));
}

NonrigidProblem::NonrigidProblem(Centerline c, const Volume3D& vol, const PullbackGrid& target,
                                 double rigid_angle, const OptimizerConfig& cfg)
    : cl_(std::move(c)), vol_(&vol), rigid_angle_(rigid_angle), cfg_(cfg) {
  vol.validate();
  target.validate();
  if (cfg.m_long < 4 || cfg.m_rot < 4 || cfg.m_trans < 4)
    throw ConfigError("control-point counts must be at least 4");
  if (cfg.lr_long <= 0 || cfg.lr_rot <= 0 || cfg.lr_trans <= 0)
    throw ConfigError("learning rates must be positive");
  if (cfg.epochs < 0) throw ConfigError("epoch count must be nonnegative");
  if (cfg.max_rel <= 0) throw ConfigError("stretch clamp fraction must be positive");
  if (target.n_frames < 2) throw DataError("registration needs at least 2 target frames");

  for (std::uint8_t f : target.valid) n_valid_ += f ? 1 : 0;
  if (n_valid_ == 0) throw DataError("no valid frames in the target pullback");

  target_ = gaussian_smooth_longitudinal(target, cfg.smooth_sigma, cfg.smooth_ksize);
  for (float& x : target_.data) x = float(clamp_inside(double(x), tau_));

  spec_ = SamplingGridSpec::like(target_);
  const int n = target_.n_frames;
  f_init_ = init_frames(cl_, n);

  std::vector<double> u(n);
  for (int i = 0; i < n; ++i) u[i] = double(i) / (n - 1);
  b_long_ = build_basis(u, cfg.m_long);
  b_rot_ = build_basis(u, cfg.m_rot);
  b_trans_ = build_basis(u, cfg.m_trans);
  greville_ = greville_abscissae(cfg.m_long);

  colcoord_.resize(spec_.width);
  rowcoord_.resize(spec_.height);
  for (int cc = 0; cc < spec_.width; ++cc)
    colcoord_[cc] = (cc - spec_.center_col()) * spec_.in_plane_spacing;
  for (int rr = 0; rr < spec_.height; ++rr)
    rowcoord_[rr] = (rr - spec_.center_row()) * spec_.in_plane_spacing;
}

DeformationParams NonrigidProblem::zero_params() const {
  DeformationParams p;
  p.x_s.assign(cfg_.m_long - 1, 0.0);
  p.x_theta.assign(cfg_.m_rot - 1, 0.0);
  p.p_u.assign(cfg_.m_trans, 0.0);
  p.p_v.assign(cfg_.m_trans, 0.0);
  return p;
}

DeformationCurves NonrigidProblem::derive_curves(const DeformationParams& p) const {
  if (int(p.x_s.size()) != cfg_.m_long - 1 || int(p.x_theta.size()) != cfg_.m_rot - 1 ||
      int(p.p_u.size()) != cfg_.m_trans || int(p.p_v.size()) != cfg_.m_trans)
    throw ConfigError("deformation parameter shapes do not match the configured control counts");

  DeformationCurves cur;
  const CumulativeControls cs = cumulative_controls(p.x_s, greville_, cfg_.max_rel, true);
  cur.s = b_long_.apply(cs.p);
  cur.active_s = cs.active;
  for (std::size_t i = 1; i < cur.s.size(); ++i)
    if (!(cur.s[i] > cur.s[i - 1]))
      throw NumericalError("catheter parametrization lost monotonicity between frames " +
                           std::to_string(i - 1) + " and " + std::to_string(i));

  const std::vector<double> zero_rot(cfg_.m_rot, 0.0);
  const CumulativeControls ct = cumulative_controls(p.x_theta, zero_rot, cfg_.max_rel, false);
  cur.theta = b_rot_.apply(ct.p);
  for (double& t : cur.theta) t += rigid_angle_;

  cur.du = b_trans_.apply(p.p_u);
  cur.dv = b_trans_.apply(p.p_v);
  return cur;
}

FrameSet NonrigidProblem::frames_at(const DeformationCurves& cur, const FrameSet* orient) const {
  if (!orient) return compose(f_init_, cur.s, cur.theta, cur.du, cur.dv, cl_);
  FrameSet f = *orient;
  for (int i = 0; i < f.size(); ++i) {
    f.R[i] = cl_.eval(cur.s[i]);
    f.s[i] = cur.s[i];
  }
  return phi_trans(phi_rot(std::move(f), cur.theta), cur.du, cur.dv);
}

double NonrigidProblem::loss_of_frames(const FrameSet& f) const {
  sample_frames(f, *vol_, spec_, val_, gx_, gy_, gz_);
  const auto& k = kernels::ops();
  const std::size_t hw = target_.frame_pixels();
  double sum = 0.0;
  for (int i = 0; i < target_.n_frames; ++i) {
    if (!target_.valid[i]) continue;
    sum += k.clamped_mse(val_.data() + hw * i, target_.frame(i), hw, tau_);
  }
  return sum / (double(n_valid_) * double(hw));
}

double NonrigidProblem::loss(const DeformationParams& p, FrameSet* frames_out) const {
  const DeformationCurves cur = derive_curves(p);
  FrameSet f = frames_at(cur, nullptr);
  const double L = loss_of_frames(f);
  if (frames_out) *frames_out = std::move(f);
  return L;
}

double NonrigidProblem::loss_frozen(const DeformationParams& p,
                                    const DeformationParams& ref) const {
  const DeformationCurves ref_cur = derive_curves(ref);
  const FrameSet orient = phi_long(f_init_, ref_cur.s, cl_);
  const DeformationCurves cur = derive_curves(p);
  return loss_of_frames(frames_at(cur, &orient));
}

double NonrigidProblem::gradients(const DeformationParams& p, DeformationParams& g) const {
  const DeformationCurves cur = derive_curves(p);
  const FrameSet f = frames_at(cur, nullptr);
  sample_frames(f, *vol_, spec_, val_, gx_, gy_, gz_);

  const auto& k = kernels::ops();
  const int n = target_.n_frames;
  const std::size_t hw = target_.frame_pixels();
  const double scale = 2.0 / (double(n_valid_) * double(hw));

  std::vector<double> gs(n, 0.0), gtheta(n, 0.0), gdu(n, 0.0), gdv(n, 0.0);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!target_.valid[i]) continue;
    const std::size_t off = hw * std::size_t(i);
    const kernels::FrameMoments mo = k.frame_moments(
        val_.data() + off, target_.frame(i), gx_.data() + off, gy_.data() + off,
        gz_.data() + off, colcoord_.data(), rowcoord_.data(), cur.du[i], cur.dv[i],
        spec_.height, spec_.width, tau_, scale);
    sum += mo.loss;
    gs[i] = dot3(mo.sum, cl_.derivative(cur.s[i]));
    gtheta[i] = dot3(mo.asum, f.V[i]) - dot3(mo.bsum, f.U[i]);
    gdu[i] = dot3(mo.sum, f.U[i]);
    gdv[i] = dot3(mo.sum, f.V[i]);
  }

  std::vector<double> gp_s(cfg_.m_long, 0.0);
  b_long_.apply_transpose(gs, gp_s);
  g.x_s = cumulative_controls_backward(gp_s, cur.active_s);

  std::vector<double> gp_t(cfg_.m_rot, 0.0);
  b_rot_.apply_transpose(gtheta, gp_t);
  g.x_theta = cumulative_controls_backward(gp_t, std::vector<std::uint8_t>(cfg_.m_rot, 1));

  g.p_u.assign(cfg_.m_trans, 0.0);
  b_trans_.apply_transpose(gdu, g.p_u);
  g.p_v.assign(cfg_.m_trans, 0.0);
  b_trans_.apply_transpose(gdv, g.p_v);

  return sum / (double(n_valid_) * double(hw));
}

RegistrationResult optimize(const NonrigidProblem& prob) {
  const OptimizerConfig& cfg = prob.config();
  RegistrationResult res;
  res.rigid_angle = prob.rigid_angle();

  DeformationParams x = prob.zero_params(), g = x, best = x;
  AdamState st_s(x.x_s.size()), st_t(x.x_theta.size()), st_u(x.p_u.size()), st_v(x.p_v.size());
  double best_loss = std::numeric_limits<double>::infinity();

  res.loss_history.reserve(cfg.epochs);
  res.s_monotone.reserve(cfg.epochs);
  for (int it = 0; it < cfg.epochs; ++it) {
    const double L = prob.gradients(x, g);
    if (!std::isfinite(L))
      throw NumericalError("non-finite loss at iteration " + std::to_string(it) +
                           "; parameter snapshot: x_s=" + join(x.x_s) +
                           " x_theta=" + join(x.x_theta) + " p_u=" + join(x.p_u) +
                           " p_v=" + join(x.p_v));
    res.loss_history.push_back(L);
    res.s_monotone.push_back(1);  // derive_curves throws on violation
    if (L < best_loss) {
      best_loss = L;
      best = x;
      res.best_iteration = it;
    }
    const int t = it + 1;
    adam_step(x.x_s, g.x_s, st_s, cfg.lr_long, cfg.beta1, cfg.beta2, cfg.eps, t);
    adam_step(x.x_theta, g.x_theta, st_t, cfg.lr_rot, cfg.beta1, cfg.beta2, cfg.eps, t);
    adam_step(x.p_u, g.p_u, st_u, cfg.lr_trans, cfg.beta1, cfg.beta2, cfg.eps, t);
    adam_step(x.p_v, g.p_v, st_v, cfg.lr_trans, cfg.beta1, cfg.beta2, cfg.eps, t);
  }

  res.params = best;
  res.final_loss = prob.loss(res.params, &res.frames);
  if (!res.loss_history.empty() && res.final_loss > res.loss_history.front())
    std::fprintf(stderr, "warning: final loss %.9g above initial %.9g\n", res.final_loss,
                 res.loss_history.front());
  return res;
}

}  // namespace vcreg
