#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <tuple>
#include <utility>
#include <vector>

#include "acr/combine.hpp"
#include "acr/errors.hpp"
#include "acr/matrix.hpp"

namespace acr {

//! Covariates (n x p, no intercept column) and responses.
struct DesignData {
  Matrix x;
  Vector y;

  DesignData() = default;
  DesignData(Matrix x_, Vector y_) : x(std::move(x_)), y(std::move(y_)) { validate(); }

  std::size_t n() const { return y.size(); }
  std::size_t p() const { return x.cols(); }

  void validate() const {
    if (x.rows() != y.size()) throw Error("DesignData: row count mismatch");
    if (!(y.size() > x.cols())) throw Error("DesignData: need n > p");
    if (!x.finite()) throw Error("DesignData: non-finite covariate");
    for (double v : y)
      if (!std::isfinite(v)) throw Error("DesignData: non-finite response");
  }
};

struct QuantileFit {
  double tau = 0.0;
  double intercept = 0.0;
  Vector beta;
  double objective = 0.0;
  int iterations = 0;
};

struct CqrFit {
  Vector beta;
  std::vector<double> intercepts;
  double objective = 0.0;
  int iterations = 0;
};

//! Density of the regression error, evaluated pointwise. The experiments use
//! the known Gamma(1) density; the KDE constructor covers the unknown case.
struct ErrorDensity {
  std::function<double(double)> density;

  static ErrorDensity exponential() {
    return {[](double u) { return u > 0.0 ? std::exp(-u) : 0.0; }};
  }

  static ErrorDensity gaussian_kde(const std::vector<double>& sample) {
    if (sample.size() < 2) throw Error("gaussian_kde: need at least two points");
    const std::size_t n = sample.size();
    double mean = 0.0;
    for (double v : sample) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : sample) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    std::vector<double> sorted(sample);
    std::sort(sorted.begin(), sorted.end());
    const double iqr =
        sorted[static_cast<std::size_t>(0.75 * (n - 1))] - sorted[static_cast<std::size_t>(0.25 * (n - 1))];
    double spread = std::min(std::sqrt(var), iqr / 1.34);
    if (!(spread > 0.0)) spread = std::max(std::sqrt(var), 1e-12);
    const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
    auto pts = std::make_shared<std::vector<double>>(sample);
    return {[pts, h, n](double u) {
      double s = 0.0;
      for (double xi : *pts) {
        const double z = (u - xi) / h;
        s += std::exp(-0.5 * z * z);
      }
      return s / (static_cast<double>(n) * h * std::sqrt(2.0 * 3.14159265358979323846));
    }};
  }
};

//! Check function: tau * t_+ + (1 - tau) * t_-.
inline double check_loss(double t, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error("check_loss: tau must be in (0,1)");
  return t >= 0.0 ? tau * t : (tau - 1.0) * t;
}

namespace detail {

//! Exact tau-quantile of y as the check-loss minimizer (lower order statistic
//! when the minimizing set is an interval).
inline double sample_quantile(std::vector<double> y, double tau) {
  std::sort(y.begin(), y.end());
  const double nt = static_cast<double>(y.size()) * tau;
  std::size_t k = static_cast<std::size_t>(std::ceil(nt));
  if (k < 1) k = 1;
  if (k > y.size()) k = y.size();
  return y[k - 1];
}

struct StackedQr {
  // One row per (observation, quantile level): residual r = y - b_k - beta'x.
  const DesignData& data;
  const std::vector<double>& taus;

  std::size_t m() const { return taus.size(); }
  std::size_t q() const { return m() + data.p(); }

  double objective(const std::vector<double>& gamma) const {
    const std::size_t n = data.n(), p = data.p();
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double xb = 0.0;
      for (std::size_t j = 0; j < p; ++j) xb += data.x(i, j) * gamma[m() + j];
      for (std::size_t k = 0; k < m(); ++k)
        obj += check_loss(data.y[i] - gamma[k] - xb, taus[k]);
    }
    return obj;
  }

  void residuals(const std::vector<double>& gamma, std::vector<double>& r) const {
    const std::size_t n = data.n(), p = data.p();
    r.resize(n * m());
    for (std::size_t i = 0; i < n; ++i) {
      double xb = 0.0;
      for (std::size_t j = 0; j < p; ++j) xb += data.x(i, j) * gamma[m() + j];
      for (std::size_t k = 0; k < m(); ++k) r[i * m() + k] = data.y[i] - gamma[k] - xb;
    }
  }

  // Weighted normal equations exploiting the (intercept-block | beta) layout.
  std::vector<double> mm_step(const std::vector<double>& r, double eps) const {
    const std::size_t n = data.n(), p = data.p(), mm = m(), qq = q();
    Matrix a(qq, qq);
    Vector rhs(qq, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < mm; ++k) {
        const double d = std::max(std::fabs(r[i * mm + k]), eps);
        const double wi = 1.0 / (2.0 * d);
        const double ci = wi * data.y[i] + (taus[k] - 0.5);
        a(k, k) += wi;
        rhs[k] += ci;
        for (std::size_t j = 0; j < p; ++j) {
          const double xij = data.x(i, j);
          a(k, mm + j) += wi * xij;
          rhs[mm + j] += ci * xij;
          for (std::size_t j2 = j; j2 < p; ++j2)
            a(mm + j, mm + j2) += wi * xij * data.x(i, j2);
        }
      }
    }
    for (std::size_t i = 0; i < qq; ++i)
      for (std::size_t j = i + 1; j < qq; ++j) a(j, i) = a(i, j);
    return solve_spd(a, rhs);
  }
};

//! Smoothed-loss majorize-minimize with a shrinking smoothing floor.
//! Returns (gamma, objective, iterations).
inline std::tuple<std::vector<double>, double, int> qr_mm(const StackedQr& prob) {
  const std::size_t qq = prob.q();
  double yscale = 0.0;
  for (double v : prob.data.y) yscale = std::max(yscale, std::fabs(v));
  yscale = std::max(yscale, 1.0);

  std::vector<double> gamma(qq, 0.0);
  // Start each intercept at the marginal quantile; beta at zero.
  std::vector<double> ysorted(prob.data.y);
  for (std::size_t k = 0; k < prob.m(); ++k)
    gamma[k] = sample_quantile(ysorted, prob.taus[k]);

  std::vector<double> r;
  int iters = 0;
  double obj = prob.objective(gamma);
  for (double eps = 1e-2 * yscale; eps > 1e-12 * yscale; eps *= 0.1) {
    for (int inner = 0; inner < 50; ++inner) {
      ++iters;
      prob.residuals(gamma, r);
      std::vector<double> next;
      try {
        next = prob.mm_step(r, eps);
      } catch (const NotPositiveDefinite&) {
        throw RankDeficient("quantile design not of full column rank");
      }
      const double next_obj = prob.objective(next);
      if (next_obj <= obj) {
        gamma = std::move(next);
        const bool settled = (obj - next_obj) <= 1e-13 * (1.0 + next_obj);
        obj = next_obj;
        if (settled) break;
      } else {
        break;
      }
      if (iters >= 500) return {gamma, obj, iters};
    }
  }
  return {gamma, obj, iters};
}

//! Snap to the exact interpolating solution through the q near-zero-residual
//! points when that improves (or ties) the objective.
inline void vertex_polish(const DesignData& data, double tau, std::vector<double>& gamma,
                          double& obj) {
  const std::size_t n = data.n(), p = data.p(), q = p + 1;
  if (n < q) return;
  std::vector<std::pair<double, std::size_t>> by_resid(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fit = gamma[0];
    for (std::size_t j = 0; j < p; ++j) fit += data.x(i, j) * gamma[1 + j];
    by_resid[i] = {std::fabs(data.y[i] - fit), i};
  }
  std::sort(by_resid.begin(), by_resid.end());

  auto try_subset = [&](const std::vector<std::size_t>& idx) {
    Matrix z(q, q);
    Vector ys(q);
    for (std::size_t r = 0; r < q; ++r) {
      z(r, 0) = 1.0;
      for (std::size_t j = 0; j < p; ++j) z(r, 1 + j) = data.x(idx[r], j);
      ys[r] = data.y[idx[r]];
    }
    std::vector<double> cand;
    try {
      cand = solve_linear(z, ys);
    } catch (const Error&) {
      return;
    }
    double cobj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double fit = cand[0];
      for (std::size_t j = 0; j < p; ++j) fit += data.x(i, j) * cand[1 + j];
      cobj += check_loss(data.y[i] - fit, tau);
    }
    if (cobj <= obj) {
      obj = cobj;
      gamma = std::move(cand);
    }
  };

  std::vector<std::size_t> base(q);
  for (std::size_t r = 0; r < q; ++r) base[r] = by_resid[r].second;
  try_subset(base);

  if (n <= 50) {
    // Small problems: search all q-subsets of the candidate pool.
    const std::size_t pool = std::min(n, 2 * q + 2);
    std::vector<std::size_t> pick(q);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t depth) {
      if (depth == q) {
        std::vector<std::size_t> idx(q);
        for (std::size_t r = 0; r < q; ++r) idx[r] = by_resid[pick[r]].second;
        try_subset(idx);
        return;
      }
      for (std::size_t i = start; i + (q - depth) <= pool; ++i) {
        pick[depth] = i;
        rec(i + 1, depth + 1);
      }
    };
    rec(0, 0);
  }
}

}  // namespace detail

//! Linear quantile regression of y on (1, x) at level tau.
inline QuantileFit fit_quantile(const DesignData& data, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error("fit_quantile: tau must be in (0,1)");
  const std::size_t p = data.p();

  bool all_zero = true;
  for (std::size_t i = 0; i < data.n() && all_zero; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (data.x(i, j) != 0.0) {
        all_zero = false;
        break;
      }
  if (p == 0 || all_zero) {
    const double b = detail::sample_quantile(data.y, tau);
    double obj = 0.0;
    for (double v : data.y) obj += check_loss(v - b, tau);
    return {tau, b, Vector(p, 0.0), obj, 0};
  }

  std::vector<double> taus{tau};
  detail::StackedQr prob{data, taus};
  auto [gamma, obj, iters] = detail::qr_mm(prob);
  detail::vertex_polish(data, tau, gamma, obj);
  QuantileFit fit;
  fit.tau = tau;
  fit.intercept = gamma[0];
  fit.beta.assign(gamma.begin() + 1, gamma.end());
  fit.objective = obj;
  fit.iterations = iters;
  return fit;
}

//! Composite quantile regression: one slope vector shared across all levels,
//! one intercept per level.
inline CqrFit fit_cqr(const DesignData& data, const std::vector<double>& taus) {
  if (taus.empty()) throw Error("fit_cqr: empty tau list");
  for (std::size_t k = 0; k < taus.size(); ++k) {
    if (!(taus[k] > 0.0 && taus[k] < 1.0)) throw Error("fit_cqr: tau must be in (0,1)");
    for (std::size_t j = k + 1; j < taus.size(); ++j)
      if (taus[k] == taus[j]) throw Error("fit_cqr: taus must be distinct");
  }
  detail::StackedQr prob{data, taus};
  auto [gamma, obj, iters] = detail::qr_mm(prob);
  CqrFit fit;
  fit.intercepts.assign(gamma.begin(), gamma.begin() + taus.size());
  fit.beta.assign(gamma.begin() + taus.size(), gamma.end());
  fit.objective = obj;
  fit.iterations = iters;
  return fit;
}

//! ACR composite quantile estimator: per-level fits, each shifted by its
//! plugged-in Bahadur correction, then weighted.
inline Vector ace_quantile(const DesignData& data, const std::vector<double>& taus,
                           const WeightVector& w, const ErrorDensity& fe) {
  const std::size_t n = data.n(), p = data.p();
  if (w.size() != taus.size()) throw Error("ace_quantile: weight length mismatch");
  if (p == 0) throw Error("ace_quantile: needs at least one covariate");

  Matrix dn(p, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t j2 = j; j2 < p; ++j2) dn(j, j2) += data.x(i, j) * data.x(i, j2);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t j2 = j + 1; j2 < p; ++j2) dn(j2, j) = dn(j, j2);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t j2 = 0; j2 < p; ++j2) dn(j, j2) /= static_cast<double>(n);

  Vector beta_tilde(p, 0.0);
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const QuantileFit fit = fit_quantile(data, taus[k]);
    const double fq = fe.density(fit.intercept);
    if (fq <= 1e-12) throw ZeroDensity("error density vanishes at fitted quantile");
    Vector score(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double fitval = fit.intercept;
      for (std::size_t j = 0; j < p; ++j) fitval += data.x(i, j) * fit.beta[j];
      const double g = taus[k] - (data.y[i] <= fitval ? 1.0 : 0.0);
      for (std::size_t j = 0; j < p; ++j) score[j] += data.x(i, j) * g;
    }
    const Vector corr = solve_spd(dn, score);
    for (std::size_t j = 0; j < p; ++j)
      beta_tilde[j] += w[k] * (fit.beta[j] - corr[j] / (fq * static_cast<double>(n)));
  }
  return beta_tilde;
}

//! Limiting covariance structure of the per-level quantile estimators:
//! min(tau_k, tau_j)(1 - max(tau_k, tau_j)) / (f(Q(tau_k)) f(Q(tau_j))).
inline Matrix a0_matrix(const std::vector<double>& taus, const std::vector<double>& fq) {
  if (taus.size() != fq.size()) throw Error("a0_matrix: length mismatch");
  const std::size_t m = taus.size();
  for (double f : fq)
    if (!(f > 0.0)) throw Error("a0_matrix: densities must be positive");
  Matrix a(m, m);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t j = 0; j < m; ++j) {
      const double lo = std::min(taus[k], taus[j]);
      const double hi = std::max(taus[k], taus[j]);
      a(k, j) = lo * (1.0 - hi) / (fq[k] * fq[j]);
    }
  return a;
}

inline WeightVector optimal_qr_weights(const Matrix& a0) { return optimal_tilde_weights(a0); }

}  // namespace acr
