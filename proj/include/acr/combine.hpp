#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "acr/errors.hpp"
#include "acr/matrix.hpp"
#include "acr/numerics.hpp"

namespace acr {

//! Weights summing to one. Entries may be negative: regenerated weights are
//! not sign-constrained.
struct WeightVector {
  std::vector<double> values;

  WeightVector() = default;
  explicit WeightVector(std::vector<double> v) : values(std::move(v)) { validate(); }

  static WeightVector equal(std::size_t m) {
    return WeightVector(std::vector<double>(m, 1.0 / static_cast<double>(m)));
  }

  //! Normalize an arbitrary nonzero-sum vector to sum one.
  static WeightVector proportional(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    if (std::fabs(s) < 1e-300) throw Error("WeightVector: zero-sum input");
    std::vector<double> out(v);
    for (double& x : out) x /= s;
    return WeightVector(std::move(out));
  }

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t k) const { return values[k]; }

  void validate() const {
    double s = 0.0, mag = 0.0;
    for (double x : values) {
      if (!std::isfinite(x)) throw Error("WeightVector: non-finite entry");
      s += x;
      mag += std::fabs(x);
    }
    // Tolerance scales with the entry magnitudes: regenerated weights can be
    // large and of mixed sign, and their unit sum is exact only in real
    // arithmetic.
    if (std::fabs(s - 1.0) > 1e-12 * std::max(1.0, mag))
      throw Error("WeightVector: weights sum to " + std::to_string(s) + ", not 1");
  }
};

//! One initial estimator per value of the model-independent parameter,
//! together with the plug-in xi values of its asymptotic representation.
struct InitialEstimateSet {
  std::vector<double> taus;
  std::vector<double> theta_hats;
  std::vector<double> xi_hats;

  InitialEstimateSet() = default;
  InitialEstimateSet(std::vector<double> t, std::vector<double> th, std::vector<double> xi)
      : taus(std::move(t)), theta_hats(std::move(th)), xi_hats(std::move(xi)) {
    validate();
  }

  std::size_t m() const { return taus.size(); }

  void validate() const {
    if (taus.size() < 2 || taus.size() != theta_hats.size() || taus.size() != xi_hats.size())
      throw Error("InitialEstimateSet: need m >= 2 equal-length series");
    for (std::size_t k = 0; k < taus.size(); ++k) {
      if (!std::isfinite(taus[k]) || !std::isfinite(theta_hats[k]) || !std::isfinite(xi_hats[k]))
        throw Error("InitialEstimateSet: non-finite entry");
      if (k > 0 && !(taus[k] > taus[k - 1]))
        throw Error("InitialEstimateSet: taus must be strictly increasing");
    }
  }
};

struct CombineResult {
  double theta_tilde = 0.0;
  //! Fitted scale of the correction term; zero when the scale was supplied.
  double phi_hat = 0.0;
};

namespace detail {

//! Weighted mean and the centered second moment of xi under w. Throws
//! DegenerateDesign when the xi-spread is numerically zero, in which case
//! the regression on xi is unidentifiable.
inline std::pair<double, double> xi_moments(const std::vector<double>& w,
                                            const std::vector<double>& xi) {
  const std::size_t m = xi.size();
  double xi_bar = 0.0, max_sq = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    xi_bar += w[k] * xi[k];
    max_sq = std::max(max_sq, xi[k] * xi[k]);
  }
  double denom = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double d = xi[k] - xi_bar;
    denom += w[k] * d * d;
  }
  if (!(std::fabs(denom) > 1e-12 * max_sq))
    throw DegenerateDesign("all xi values numerically equal");
  return {xi_bar, denom};
}

}  // namespace detail

//! ACR estimator with unknown scale: weighted least squares of theta_hat on
//! xi_hat, returning the intercept and the fitted slope.
inline CombineResult combine_unknown_scale(const InitialEstimateSet& est,
                                           const WeightVector& w) {
  est.validate();
  if (w.size() != est.m()) throw Error("combine_unknown_scale: weight length mismatch");
  const auto [xi_bar, denom] = detail::xi_moments(w.values, est.xi_hats);
  double num = 0.0, theta_mean = 0.0;
  for (std::size_t k = 0; k < est.m(); ++k) {
    num += w[k] * est.theta_hats[k] * (est.xi_hats[k] - xi_bar);
    theta_mean += w[k] * est.theta_hats[k];
  }
  const double phi = num / denom;
  return {theta_mean - phi * xi_bar, phi};
}

//! ACR estimator with the scale supplied by the caller.
inline CombineResult combine_known_scale(const InitialEstimateSet& est,
                                         const WeightVector& w, double phi_n) {
  est.validate();
  if (w.size() != est.m()) throw Error("combine_known_scale: weight length mismatch");
  if (!std::isfinite(phi_n)) throw Error("combine_known_scale: non-finite phi_n");
  double s = 0.0;
  for (std::size_t k = 0; k < est.m(); ++k)
    s += w[k] * (est.theta_hats[k] - est.xi_hats[k] * phi_n);
  return {s, phi_n};
}

//! Effective weights the ACR regression puts on the initial estimators.
//! They sum to one whatever w is; entries may be negative.
inline WeightVector regenerated_weights(const WeightVector& w,
                                        const std::vector<double>& xi) {
  if (w.size() != xi.size()) throw Error("regenerated_weights: length mismatch");
  const auto [xi_bar, denom] = detail::xi_moments(w.values, xi);
  std::vector<double> out(w.size());
  for (std::size_t k = 0; k < w.size(); ++k)
    out[k] = w[k] - xi_bar * w[k] * (xi[k] - xi_bar) / denom;
  return WeightVector(std::move(out));
}

//! Minimizer of w' Sigma w subject to sum(w) = 1: (1' Sigma^-1 1)^-1 Sigma^-1 1.
inline WeightVector optimal_tilde_weights(const Matrix& sigma) {
  const std::size_t m = sigma.rows();
  const Vector z = solve_spd(sigma, Vector(m, 1.0));
  double s = 0.0;
  for (double v : z) s += v;
  std::vector<double> w(m);
  for (std::size_t k = 0; k < m; ++k) w[k] = z[k] / s;
  return WeightVector(std::move(w));
}

//! Solve the nonlinear original-weight equations: find w with
//! regenerated_weights(w, xi) = w_tilde_star. The sum constraint is kept by
//! eliminating the last component, so the Newton system is (m-1)-dimensional
//! and nonsingular. Starts from w_tilde_star itself.
inline WeightVector solve_original_weights(const WeightVector& w_tilde_star,
                                           const std::vector<double>& xi,
                                           double tol = 1e-8) {
  const std::size_t m = w_tilde_star.size();
  if (xi.size() != m) throw Error("solve_original_weights: length mismatch");
  // Degeneracy check on the target design (equal weights as the reference).
  detail::xi_moments(std::vector<double>(m, 1.0 / static_cast<double>(m)), xi);

  auto expand = [m](const Vector& free) {
    std::vector<double> w(m);
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < m; ++k) {
      w[k] = free[k];
      s += free[k];
    }
    w[m - 1] = 1.0 - s;
    return w;
  };

  auto residual = [&](const Vector& free) {
    const std::vector<double> w = expand(free);
    Vector r(m - 1, 1e50);
    try {
      const auto [xi_bar, denom] = detail::xi_moments(w, xi);
      for (std::size_t k = 0; k + 1 < m; ++k) {
        const double reg = w[k] - xi_bar * w[k] * (xi[k] - xi_bar) / denom;
        r[k] = reg - w_tilde_star[k];
      }
    } catch (const DegenerateDesign&) {
      // Out-of-domain probe; damping will back off.
    }
    return r;
  };

  Vector start(m - 1);
  for (std::size_t k = 0; k + 1 < m; ++k) start[k] = w_tilde_star[k];
  Vector free;
  try {
    free = solve_nonlinear(residual, start, tol * 1e-2);
  } catch (NoConvergence& e) {
    e.best = expand(e.best);
    throw;
  }
  return WeightVector(expand(free));
}

}  // namespace acr
