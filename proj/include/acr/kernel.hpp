#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "acr/combine.hpp"
#include "acr/errors.hpp"
#include "acr/matrix.hpp"
#include "acr/numerics.hpp"

namespace acr {

enum class KernelKind { epanechnikov, gaussian };

struct KernelSpec {
  KernelKind kind;
  std::function<double(double)> eval;
  double mu2;      // second moment of K
  double support;  // half-width of the support; infinity for Gaussian

  static KernelSpec epanechnikov() {
    return {KernelKind::epanechnikov,
            [](double u) { return std::fabs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0; }, 0.2,
            1.0};
  }

  static KernelSpec gaussian() {
    return {KernelKind::gaussian,
            [](double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * 3.14159265358979323846); },
            1.0, std::numeric_limits<double>::infinity()};
  }

  //! Checks unit mass (by quadrature) and symmetry on sampled points.
  void validate() const;
};

inline void KernelSpec::validate() const {
  const double half = std::isfinite(support) ? support : 12.0;
  const double mass = integrate(eval, -half, half, 1e-10);
  if (std::fabs(mass - 1.0) > 1e-8) throw Error("KernelSpec: kernel mass is not 1");
  for (double u = 0.125; u <= half; u += 0.25)
    if (std::fabs(eval(u) - eval(-u)) > 1e-12) throw Error("KernelSpec: kernel not symmetric");
}

//! Bandwidths h_k = tau_k * n^(-eta).
struct BandwidthSchedule {
  double eta = 0.2;
  std::vector<double> taus;
  std::size_t n = 0;

  double bandwidth(std::size_t k) const {
    return taus[k] * std::pow(static_cast<double>(n), -eta);
  }
  std::size_t m() const { return taus.size(); }
};

struct RegressionSample {
  std::vector<double> xs, ys;

  std::size_t n() const { return xs.size(); }
  void validate() const {
    if (xs.size() != ys.size()) throw Error("RegressionSample: length mismatch");
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
        throw Error("RegressionSample: non-finite entry");
  }
};

//! Nadaraya-Watson (local constant) estimate at x.
inline double nw_estimate(const RegressionSample& s, double x, double h,
                          const KernelSpec& k) {
  if (!(h > 0.0)) throw Error("nw_estimate: bandwidth must be positive");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double w = k.eval((s.xs[i] - x) / h);
    num += w * s.ys[i];
    den += w;
  }
  if (den <= 1e-300) throw EmptyWindow("nw_estimate: no mass at x=" + std::to_string(x));
  return num / den;
}

//! Composite local constant estimator: kernels pooled across bandwidths.
inline double clc_estimate(const RegressionSample& s, double x,
                           const std::vector<double>& hs, const KernelSpec& k) {
  double num = 0.0, den = 0.0;
  for (double h : hs) {
    if (!(h > 0.0)) throw Error("clc_estimate: bandwidth must be positive");
    for (std::size_t i = 0; i < s.n(); ++i) {
      const double w = k.eval((s.xs[i] - x) / h);
      num += w * s.ys[i];
      den += w;
    }
  }
  if (den <= 1e-300) throw EmptyWindow("clc_estimate: no mass at x=" + std::to_string(x));
  return num / den;
}

enum class XiVariant {
  //! Residuals against the full-sample fit: identically zero under the
  //! plug-in v-hat (the Nadaraya-Watson normal equation).
  literal,
  //! Residuals against leave-one-out fits, which keeps a nonzero correction.
  leave_one_out
};

//! Plug-in Bahadur term xi-hat(tau) at x for the bandwidth h = tau * n^(-eta).
inline double xi_hat_nw(const RegressionSample& s, double x, double tau,
                        const BandwidthSchedule& sched, const KernelSpec& k,
                        XiVariant variant = XiVariant::leave_one_out) {
  const std::size_t n = s.n();
  const double h = tau * std::pow(static_cast<double>(n), -sched.eta);
  if (!(h > 0.0)) throw Error("xi_hat_nw: bandwidth must be positive");
  double sk = 0.0, sy = 0.0;
  std::vector<double> kw(n);
  for (std::size_t i = 0; i < n; ++i) {
    kw[i] = k.eval((s.xs[i] - x) / h) / h;
    sk += kw[i];
    sy += kw[i] * s.ys[i];
  }
  if (sk <= 1e-300) throw EmptyWindow("xi_hat_nw: no mass at x=" + std::to_string(x));
  const double r_full = sy / sk;
  const double v_hat = sk / static_cast<double>(n);

  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (kw[i] == 0.0) continue;
    double fit = r_full;
    if (variant == XiVariant::leave_one_out) {
      const double den = sk - kw[i];
      if (den > 1e-300) fit = (sy - kw[i] * s.ys[i]) / den;
    }
    acc += kw[i] * (s.ys[i] - fit);
  }
  return acc / (static_cast<double>(n) * v_hat);
}

//! First ACR estimator: regression of the per-bandwidth fits on tau^2,
//! evaluated at the intercept. The regressor is free of the target, so the
//! regenerated-weight identity applies exactly.
inline double ace_r1(const RegressionSample& s, double x, const BandwidthSchedule& sched,
                     const WeightVector& w, const KernelSpec& k) {
  const std::size_t m = sched.m();
  if (m < 2) throw Error("ace_r1: needs at least two bandwidths");
  std::vector<double> theta(m), xi(m);
  for (std::size_t j = 0; j < m; ++j) {
    theta[j] = nw_estimate(s, x, sched.bandwidth(j), k);
    xi[j] = sched.taus[j] * sched.taus[j];
  }
  return combine_unknown_scale(InitialEstimateSet(sched.taus, theta, xi), w).theta_tilde;
}

//! Second ACR estimator: per-bandwidth fits shifted by the estimated Bahadur
//! term at the known scale n^(-(1-eta)/2).
inline double ace_r2(const RegressionSample& s, double x, const BandwidthSchedule& sched,
                     const WeightVector& w, const KernelSpec& k,
                     XiVariant variant = XiVariant::leave_one_out) {
  const std::size_t m = sched.m();
  if (m < 1) throw Error("ace_r2: empty schedule");
  const double phi = std::pow(static_cast<double>(s.n()), -(1.0 - sched.eta) / 2.0);
  double out = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double r = nw_estimate(s, x, sched.bandwidth(j), k);
    const double xi = xi_hat_nw(s, x, sched.taus[j], sched, k, variant);
    out += w[j] * (r - phi * xi);
  }
  return out;
}

//! Cross-validated bandwidth: folds are rank parities after sorting by x,
//! the grid point with the smallest out-of-fold squared prediction error
//! wins, and ties go to the smaller bandwidth.
inline double cv_bandwidth(const RegressionSample& s, std::size_t folds,
                           const std::vector<double>& grid, const KernelSpec& k) {
  if (folds < 2) throw Error("cv_bandwidth: need at least two folds");
  if (grid.empty()) throw Error("cv_bandwidth: empty grid");
  const std::size_t n = s.n();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&s](std::size_t a, std::size_t b) { return s.xs[a] < s.xs[b]; });
  std::vector<std::size_t> fold(n);
  for (std::size_t rank = 0; rank < n; ++rank) fold[order[rank]] = rank % folds;

  std::vector<double> sorted_grid(grid);
  std::sort(sorted_grid.begin(), sorted_grid.end());

  double best_h = 0.0, best_err = std::numeric_limits<double>::infinity();
  bool any_valid = false;
  for (double h : sorted_grid) {
    double sse = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double num = 0.0, den = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (fold[j] == fold[i]) continue;
        const double w = k.eval((s.xs[j] - s.xs[i]) / h);
        num += w * s.ys[j];
        den += w;
      }
      if (den <= 1e-300) continue;  // window empty for this point; skip it
      const double pred = num / den;
      sse += (s.ys[i] - pred) * (s.ys[i] - pred);
      ++count;
    }
    if (count == 0) continue;
    any_valid = true;
    const double err = sse / static_cast<double>(count);
    if (err < best_err) {
      best_err = err;
      best_h = h;
    }
  }
  if (!any_valid) throw AllWindowsEmpty("cv_bandwidth: every bandwidth failed everywhere");
  return best_h;
}

struct AMatrices {
  Matrix a1, a2;
  std::vector<double> s;  // weight-free shrink factors entering A1
  std::vector<double> g;  // regenerated weights at the supplied w (empty if none)
};

//! Kernel cross-covariance matrices of Remark 4.4(b). Entries are computed
//! by quadrature; the Gaussian closed form is kept for cross-checks.
inline AMatrices a_matrices(const std::vector<double>& taus, const KernelSpec& k,
                            const WeightVector* w = nullptr) {
  const std::size_t m = taus.size();
  if (m == 0) throw Error("a_matrices: empty tau list");
  for (double t : taus)
    if (!(t > 0.0)) throw Error("a_matrices: taus must be positive");

  AMatrices out;
  out.a2 = Matrix(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      const double ti = taus[i], tj = taus[j];
      double lo, hi;
      if (std::isfinite(k.support)) {
        const double r = k.support * std::min(ti, tj);
        lo = -r;
        hi = r;
      } else {
        const double sig = ti * tj / std::sqrt(ti * ti + tj * tj);
        lo = -12.0 * sig;
        hi = 12.0 * sig;
      }
      const double val =
          integrate([&](double u) { return k.eval(u / ti) * k.eval(u / tj); }, lo, hi, 1e-12) /
          (ti * tj);
      out.a2(i, j) = val;
      out.a2(j, i) = val;
    }

  out.s.assign(m, 1.0);
  if (m >= 2) {
    double t2_bar = 0.0;
    for (double t : taus) t2_bar += t * t;
    t2_bar /= static_cast<double>(m);
    double denom = 0.0;
    for (double t : taus) {
      const double d = t * t - t2_bar;
      denom += d * d;
    }
    if (denom > 1e-300)
      for (std::size_t i = 0; i < m; ++i)
        out.s[i] = 1.0 - t2_bar * (taus[i] * taus[i] - t2_bar) / denom;
  }
  out.a1 = Matrix(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out.a1(i, j) = out.s[i] * out.s[j] * out.a2(i, j);

  if (w != nullptr) {
    if (w->size() != m) throw Error("a_matrices: weight length mismatch");
    if (m >= 2) {
      std::vector<double> t2(m);
      for (std::size_t i = 0; i < m; ++i) t2[i] = taus[i] * taus[i];
      out.g = regenerated_weights(*w, t2).values;
    } else {
      out.g = w->values;
    }
  }
  return out;
}

//! Closed-form Gaussian A2 entry, used to validate the quadrature path.
inline double gaussian_a2_entry(double tau_k, double tau_j) {
  return 1.0 / std::sqrt(2.0 * 3.14159265358979323846 * (tau_k * tau_k + tau_j * tau_j));
}

struct KernelWeights {
  WeightVector w1_star, w2_star;
  double factor1 = 0.0;  // (1' A1^-1 1)^-1
  double factor2 = 0.0;  // (1' A2^-1 1)^-1
};

inline KernelWeights kernel_weight_vectors(const std::vector<double>& taus,
                                           const KernelSpec& k) {
  const AMatrices am = a_matrices(taus, k);
  const std::size_t m = taus.size();
  KernelWeights out;
  out.w1_star = optimal_tilde_weights(am.a1);
  out.w2_star = optimal_tilde_weights(am.a2);
  const Vector z1 = solve_spd(am.a1, Vector(m, 1.0));
  const Vector z2 = solve_spd(am.a2, Vector(m, 1.0));
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    s1 += z1[i];
    s2 += z2[i];
  }
  out.factor1 = 1.0 / s1;
  out.factor2 = 1.0 / s2;
  return out;
}

}  // namespace acr
