#include "vcreg/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vcreg/errors.hpp"

namespace vcreg {

void ControlVector::validate() const {
  if (role != ControlRole::longitudinal) return;
  for (std::size_t j = 1; j < p.size(); ++j)
    if (!(p[j] > p[j - 1]))
      throw NumericalError("longitudinal control points must increase (violated at " +
                           std::to_string(j) + ")");
}

namespace {

std::vector<double> clamped_cubic_knots(int m) {
  // 4-fold end knots, uniform interior: m + 4 entries.
  std::vector<double> t(m + 4);
  const int segs = m - 3;
  for (int i = 0; i < 4; ++i) {
    t[i] = 0.0;
    t[m + i] = 1.0;
  }
  for (int i = 1; i < segs; ++i) t[3 + i] = static_cast<double>(i) / segs;
  return t;
}

}  // namespace

std::vector<double> BsplineBasis::apply(const std::vector<double>& p) const {
  if (static_cast<int>(p.size()) != m_)
    throw DataError("control vector has " + std::to_string(p.size()) +
                    " entries, basis expects " + std::to_string(m_));
  const int n = rows();
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const double* w = &weights_[4 * static_cast<std::size_t>(i)];
    const int c = first_col_[i];
    out[i] = ((w[0] * p[c] + w[1] * p[c + 1]) + w[2] * p[c + 2]) + w[3] * p[c + 3];
  }
  return out;
}

void BsplineBasis::apply_transpose(const std::vector<double>& g_rows,
                                   std::vector<double>& g_p) const {
  if (static_cast<int>(g_rows.size()) != rows())
    throw DataError("row gradient length does not match basis rows");
  g_p.resize(m_);
  std::fill(g_p.begin(), g_p.end(), 0.0);
  for (int i = 0; i < rows(); ++i) {
    const double* w = &weights_[4 * static_cast<std::size_t>(i)];
    const int c = first_col_[i];
    for (int j = 0; j < 4; ++j) g_p[c + j] += w[j] * g_rows[i];
  }
}

double BsplineBasis::entry(int row, int col) const {
  const int c = first_col_[row];
  if (col < c || col > c + 3) return 0.0;
  return weights_[4 * static_cast<std::size_t>(row) + (col - c)];
}

BsplineBasis build_basis(const std::vector<double>& eval_params, int m) {
  if (m < 4)
    throw ConfigError("cubic basis needs at least 4 control points, got " +
                      std::to_string(m));
  if (eval_params.empty()) throw DataError("no evaluation parameters");
  for (std::size_t i = 1; i < eval_params.size(); ++i)
    if (eval_params[i] < eval_params[i - 1])
      throw DataError("evaluation parameters must be nondecreasing");

  BsplineBasis b;
  b.m_ = m;
  b.knots_ = clamped_cubic_knots(m);
  const auto& t = b.knots_;
  const int n = static_cast<int>(eval_params.size());
  b.first_col_.resize(n);
  b.weights_.resize(4 * static_cast<std::size_t>(n));

  for (int i = 0; i < n; ++i) {
    const double u = std::clamp(eval_params[i], 0.0, 1.0);
    // Knot span: largest k in [3, m-1] with t[k] <= u.
    int k = 3;
    while (k < m - 1 && u >= t[k + 1]) ++k;

    // Triangular Cox-de Boor evaluation of the 4 nonzero cubics.
    double nvals[4] = {1.0, 0.0, 0.0, 0.0};
    double left[4], right[4];
    for (int d = 1; d <= 3; ++d) {
      left[d] = u - t[k + 1 - d];
      right[d] = t[k + d] - u;
      double saved = 0.0;
      for (int r = 0; r < d; ++r) {
        const double tmp = nvals[r] / (right[r + 1] + left[d - r]);
        nvals[r] = saved + right[r + 1] * tmp;
        saved = left[d - r] * tmp;
      }
      nvals[d] = saved;
    }
    b.first_col_[i] = k - 3;
    for (int j = 0; j < 4; ++j) b.weights_[4 * static_cast<std::size_t>(i) + j] = nvals[j];
  }
  return b;
}

std::vector<double> greville_abscissae(int m) {
  if (m < 4) throw ConfigError("cubic basis needs at least 4 control points");
  const auto t = clamped_cubic_knots(m);
  std::vector<double> g(m);
  for (int j = 0; j < m; ++j) g[j] = (t[j + 1] + t[j + 2] + t[j + 3]) / 3.0;
  return g;
}

CumulativeControls cumulative_controls(const std::vector<double>& x,
                                       const std::vector<double>& p_init, double max_rel,
                                       bool clamp) {
  const std::size_t m = p_init.size();
  if (x.size() + 1 != m)
    throw DataError("offset vector must have one entry fewer than the control vector");

  CumulativeControls out;
  out.p = p_init;
  out.active.assign(m, 0);

  double running = 0.0;
  for (std::size_t j = 1; j < m; ++j) {
    running += x[j - 1];
    double band = std::numeric_limits<double>::infinity();
    if (clamp) {
      const double gap_lo = p_init[j] - p_init[j - 1];
      const double gap_hi =
          j + 1 < m ? p_init[j + 1] - p_init[j] : std::numeric_limits<double>::infinity();
      band = max_rel * std::min(gap_lo, gap_hi);
    }
    const double delta = std::clamp(running, -band, band);
    out.p[j] = p_init[j] + delta;
    out.active[j] = std::abs(running) < band ? 1 : 0;
  }
  return out;
}

std::vector<double> cumulative_controls_backward(const std::vector<double>& g_p,
                                                 const std::vector<std::uint8_t>& active) {
  const std::size_t m = g_p.size();
  if (active.size() != m) throw DataError("active mask length does not match gradient");
  std::vector<double> g_x(m - 1, 0.0);
  double suffix = 0.0;
  for (std::size_t j = m; j-- > 1;) {
    if (active[j]) suffix += g_p[j];
    g_x[j - 1] = suffix;
  }
  return g_x;
}

}  // namespace vcreg
