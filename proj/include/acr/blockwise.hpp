#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "acr/combine.hpp"
#include "acr/errors.hpp"
#include "acr/numerics.hpp"

namespace acr {

//! Overlapping-block layout for dependent data: window width M, separation L
//! between block start points, Q blocks in total.
struct BlockScheme {
  std::size_t n = 0;
  double c = 0.0;
  double tau = 0.0;
  std::size_t M = 0, L = 0, Q = 0;

  //! 0-based start index of block i.
  std::size_t start(std::size_t i) const { return i * L; }
};

//! M = floor(n^(1-c)), L = floor(tau * n^(1-c)), Q = floor((n-M)/L) + 1.
//! `window_exponent`, when set, replaces the exponent 1-c in both M and L.
inline BlockScheme make_blocks(std::size_t n, double c, double tau,
                               std::optional<double> window_exponent = std::nullopt) {
  if (n < 4) throw InvalidScheme("make_blocks: need n >= 4");
  if (!(c > 0.0 && c <= 1.0)) throw InvalidScheme("make_blocks: c must be in (0,1]");
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidScheme("make_blocks: tau must be in (0,1]");
  const double expo = window_exponent.value_or(1.0 - c);
  const double base = std::pow(static_cast<double>(n), expo);
  BlockScheme s;
  s.n = n;
  s.c = c;
  s.tau = tau;
  s.M = static_cast<std::size_t>(std::floor(base));
  s.L = static_cast<std::size_t>(std::floor(tau * base));
  if (s.M < 1 || s.M > n) throw InvalidScheme("make_blocks: window width out of range");
  if (s.L < 1) throw InvalidScheme("make_blocks: separation L = 0; tau or c too small");
  s.Q = (n - s.M) / s.L + 1;
  if (s.Q < 2) throw InvalidScheme("make_blocks: fewer than two blocks");
  return s;
}

struct DependentSample {
  std::vector<double> xs, ys;
  double a = 0.0;  // AR coefficient used to generate the errors (metadata)

  std::size_t n() const { return xs.size(); }
  void validate() const {
    if (xs.size() != ys.size()) throw Error("DependentSample: length mismatch");
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
        throw Error("DependentSample: non-finite entry");
  }
};

//! Per-block estimating-function moments for u(y; theta) = x (y - theta x).
//! Each block mean is affine in theta: U_i(theta) = a_i - theta * b_i.
class BlockMoments {
 public:
  BlockMoments(const DependentSample& s, const BlockScheme& scheme) : scheme_(scheme) {
    s.validate();
    if (scheme.start(scheme.Q - 1) + scheme.M > s.n())
      throw InvalidScheme("block scheme overruns the sample");
    a_.resize(scheme.Q);
    b_.resize(scheme.Q);
    for (std::size_t i = 0; i < scheme.Q; ++i) {
      double sa = 0.0, sb = 0.0;
      const std::size_t lo = scheme.start(i);
      for (std::size_t j = lo; j < lo + scheme.M; ++j) {
        sa += s.xs[j] * s.ys[j];
        sb += s.xs[j] * s.xs[j];
      }
      a_[i] = sa / static_cast<double>(scheme.M);
      b_[i] = sb / static_cast<double>(scheme.M);
    }
  }

  const BlockScheme& scheme() const { return scheme_; }
  std::size_t q() const { return a_.size(); }

  double u_i(std::size_t i, double theta) const { return a_[i] - theta * b_[i]; }

  double u_bar(double theta) const {
    double s = 0.0;
    for (std::size_t i = 0; i < q(); ++i) s += u_i(i, theta);
    return s / static_cast<double>(q());
  }

  double s_var(double theta) const {
    const double ub = u_bar(theta);
    double s = 0.0;
    for (std::size_t i = 0; i < q(); ++i) {
      const double d = u_i(i, theta) - ub;
      s += d * d;
    }
    return s / static_cast<double>(q());
  }

  //! Root of the linear U-bar, when the slope is nonzero.
  double closed_form_root() const {
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < q(); ++i) {
      sa += a_[i];
      sb += b_[i];
    }
    if (std::fabs(sb) < 1e-300) throw Error("closed_form_root: zero slope");
    return sa / sb;
  }

 private:
  BlockScheme scheme_;
  std::vector<double> a_, b_;
};

//! Blockwise empirical Euclidean log-likelihood ratio. With use_s the
//! between-block variance scales the quadratic form; without it the ratio is
//! the unnormalized -(Q/2) U-bar^2.
inline double el_ratio(const BlockMoments& bm, double theta, bool use_s) {
  const double ub = bm.u_bar(theta);
  const double q = static_cast<double>(bm.q());
  if (!use_s) return -0.5 * q * ub * ub;
  const double s = bm.s_var(theta);
  if (!(s > 1e-12 * ub * ub + 1e-300))
    throw DegenerateVariance("between-block variance too small at theta=" + std::to_string(theta));
  return -0.5 * q * ub * ub / s;
}

struct BeleOptions {
  double tol = 1e-8;
  bool closed_form = false;  // bypass optimization for the linear u
  std::size_t scan_cells = 256;
};

//! Maximize the likelihood ratio over the bracket. The ratio's basin can be
//! a narrow dip in a wide bracket, so a coarse scan locates it before Brent
//! refinement; probes with degenerate variance score -infinity. Value-based
//! minimization resolves the argmax only to about sqrt(eps), so when U-bar
//! has an in-bracket root (the exact maximizer, l = 0) the result is
//! secant-polished on U-bar to machine precision.
inline double bele_fit(const BlockMoments& bm, std::pair<double, double> bracket,
                       bool use_s, const BeleOptions& opt = {}) {
  if (!(bracket.first < bracket.second)) throw Error("bele_fit: invalid bracket");
  if (opt.closed_form) return bm.closed_form_root();

  bool all_degenerate = true;
  auto neg_l = [&](double theta) {
    try {
      const double v = -el_ratio(bm, theta, use_s);
      all_degenerate = false;
      return v;
    } catch (const DegenerateVariance&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  double theta =
      scan_minimize(neg_l, bracket.first, bracket.second, opt.scan_cells,
                    std::min(opt.tol, 1e-11) * (1.0 + 0.5 * (std::fabs(bracket.first) +
                                                             std::fabs(bracket.second))));
  if (all_degenerate)
    throw DegenerateVariance("bele_fit: likelihood degenerate on the whole bracket");

  const double step = 1e-4 * (1.0 + std::fabs(theta));
  double x0 = theta, x1 = theta + step;
  double u0 = bm.u_bar(x0), u1 = bm.u_bar(x1);
  for (int it = 0; it < 30 && u1 != u0; ++it) {
    const double x2 = x1 - u1 * (x1 - x0) / (u1 - u0);
    if (!std::isfinite(x2) || x2 < bracket.first || x2 > bracket.second) break;
    x0 = x1;
    u0 = u1;
    x1 = x2;
    u1 = bm.u_bar(x1);
    if (u1 == 0.0) break;
  }
  if (std::fabs(u1) < std::fabs(bm.u_bar(theta))) {
    try {
      if (-el_ratio(bm, x1, use_s) <= neg_l(theta)) theta = x1;
    } catch (const DegenerateVariance&) {
    }
  }
  return theta;
}

inline double ols_slope(const DependentSample& s) {
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    sxy += s.xs[i] * s.ys[i];
    sxx += s.xs[i] * s.xs[i];
  }
  if (sxx < 1e-300) throw Error("ols_slope: degenerate design");
  return sxy / sxx;
}

//! Optimization bracket centered at the OLS slope.
inline std::pair<double, double> default_bracket(const DependentSample& s) {
  const double b = ols_slope(s);
  const double half = 10.0 * (1.0 + std::fabs(b));
  return {b - half, b + half};
}

struct AceBelOptions {
  BeleOptions fit;
  std::optional<double> window_exponent;
};

//! Composite blockwise estimator: per-tau likelihood fits combined by the
//! ACR regression with xi-hat(tau) = sqrt(n) * U-bar(theta-hat, tau). When
//! every xi-hat is numerically zero the correction term is negligible by
//! construction and the weighted mean is returned instead.
inline double ace_bel(const DependentSample& s, double c, const std::vector<double>& taus,
                      const WeightVector& w, std::pair<double, double> bracket, bool use_s,
                      const AceBelOptions& opt = {}) {
  if (taus.size() < 2) throw Error("ace_bel: need at least two taus");
  if (w.size() != taus.size()) throw Error("ace_bel: weight length mismatch");
  const std::size_t m = taus.size();
  std::vector<double> theta(m), xi(m);
  const double root_n = std::sqrt(static_cast<double>(s.n()));
  for (std::size_t k = 0; k < m; ++k) {
    const BlockScheme scheme = make_blocks(s.n(), c, taus[k], opt.window_exponent);
    const BlockMoments bm(s, scheme);
    theta[k] = bele_fit(bm, bracket, use_s, opt.fit);
    xi[k] = root_n * bm.u_bar(theta[k]);
  }
  double max_xi = 0.0, max_theta = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    max_xi = std::max(max_xi, std::fabs(xi[k]));
    max_theta = std::max(max_theta, std::fabs(theta[k]));
  }
  if (max_xi <= 1e-10 * (1.0 + max_theta)) {
    double out = 0.0;
    for (std::size_t k = 0; k < m; ++k) out += w[k] * theta[k];
    return out;
  }
  return combine_unknown_scale(InitialEstimateSet(taus, theta, xi), w).theta_tilde;
}

//! Pick tau from a grid by leave-one-block-out prediction error. The held-out
//! fit uses the closed-form root, which the likelihood maximizer also finds;
//! ties go to the first grid entry in the given order.
inline double cv_tau(const DependentSample& s, double c, const std::vector<double>& grid,
                     std::optional<double> window_exponent = std::nullopt) {
  if (grid.empty()) throw Error("cv_tau: empty grid");
  double best_tau = 0.0, best_err = std::numeric_limits<double>::infinity();
  bool any = false;
  for (double tau : grid) {
    BlockScheme scheme;
    try {
      scheme = make_blocks(s.n(), c, tau, window_exponent);
    } catch (const InvalidScheme&) {
      continue;
    }
    const BlockMoments bm(s, scheme);
    // Per-block sums reconstructed from the means.
    double total_err = 0.0;
    std::size_t total_count = 0;
    double sa = 0.0, sb = 0.0;
    std::vector<double> a(bm.q()), b(bm.q());
    for (std::size_t i = 0; i < bm.q(); ++i) {
      a[i] = bm.u_i(i, 0.0);           // block mean of x*y
      b[i] = -(bm.u_i(i, 1.0) - a[i]);  // block mean of x^2
      sa += a[i];
      sb += b[i];
    }
    for (std::size_t i = 0; i < bm.q(); ++i) {
      const double den = sb - b[i];
      if (std::fabs(den) < 1e-300) continue;
      const double fit = (sa - a[i]) / den;
      const std::size_t lo = scheme.start(i);
      for (std::size_t j = lo; j < lo + scheme.M; ++j) {
        const double r = s.ys[j] - fit * s.xs[j];
        total_err += r * r;
      }
      total_count += scheme.M;
    }
    if (total_count == 0) continue;
    any = true;
    const double err = total_err / static_cast<double>(total_count);
    if (err < best_err) {
      best_err = err;
      best_tau = tau;
    }
  }
  if (!any) throw InvalidScheme("cv_tau: no grid value yields a valid scheme");
  return best_tau;
}

}  // namespace acr
