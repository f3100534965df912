#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>

#include "acr/errors.hpp"
#include "acr/matrix.hpp"

namespace acr {

namespace detail {

inline double simpson(const std::function<double(double)>& f, double lo, double hi,
                      double flo, double fmid, double fhi) {
  return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double lo,
                               double hi, double flo, double fmid, double fhi,
                               double whole, double tol, int depth) {
  if (depth > 50) throw NoConvergence("integrate: subdivision limit reached");
  const double mid = 0.5 * (lo + hi);
  const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, lo, mid, flo, flm, fmid);
  const double right = simpson(f, mid, hi, fmid, frm, fhi);
  const double delta = left + right - whole;
  if (std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(f, lo, mid, flo, flm, fmid, left, 0.5 * tol, depth + 1) +
         adaptive_simpson(f, mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth + 1);
}

}  // namespace detail

//! Adaptive Simpson quadrature with absolute error target `tol`.
inline double integrate(const std::function<double(double)>& f, double lo, double hi,
                        double tol = 1e-10) {
  if (!(lo < hi)) throw Error("integrate: requires lo < hi");
  const double flo = f(lo), fhi = f(hi), fmid = f(0.5 * (lo + hi));
  const double whole = detail::simpson(f, lo, hi, flo, fmid, fhi);
  return detail::adaptive_simpson(f, lo, hi, flo, fmid, fhi, whole, tol, 0);
}

//! Brent-style scalar minimization on [lo, hi]: golden-section steps with
//! parabolic refinement. Assumes f is unimodal on the bracket (not checked);
//! always returns the best point seen, never more than 200 iterations.
inline double minimize_scalar(const std::function<double(double)>& f, double lo,
                              double hi, double tol = 1e-8) {
  if (!(lo < hi)) throw Error("minimize_scalar: requires lo < hi");
  const double gold = 0.3819660112501051;
  const double eps = std::sqrt(std::numeric_limits<double>::epsilon());
  double a = lo, b = hi;
  double x = a + gold * (b - a), w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double m = 0.5 * (a + b);
    const double tol1 = eps * std::fabs(x) + tol / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::fabs(x - m) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::fabs(e) > tol1) {
      // parabola through (x, w, v)
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::fabs(q);
      const double e_old = e;
      e = d;
      if (std::fabs(p) < std::fabs(0.5 * q * e_old) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (x < m) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x < m) ? b - x : a - x;
      d = gold * e;
    }
    const double u = (std::fabs(d) >= tol1) ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return x;
}

//! Global-ish scalar minimization: coarse scan over the bracket, then Brent
//! refinement inside the best cell. For objectives whose unimodality is not
//! guaranteed (narrow likelihood dips in wide parameter brackets).
inline double scan_minimize(const std::function<double(double)>& f, double lo, double hi,
                            std::size_t cells = 256, double tol = 1e-10) {
  if (!(lo < hi)) throw Error("scan_minimize: requires lo < hi");
  const double step = (hi - lo) / static_cast<double>(cells);
  double best_x = lo, best_f = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= cells; ++i) {
    const double x = (i == cells) ? hi : lo + step * static_cast<double>(i);
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  if (!std::isfinite(best_f)) return best_x;
  const double a = std::max(lo, best_x - step);
  const double b = std::min(hi, best_x + step);
  const double refined = minimize_scalar(f, a, b, tol);
  return (f(refined) <= best_f) ? refined : best_x;
}

//! Damped Newton on g(x) = 0 with forward-difference Jacobian (step 1e-6),
//! step halving, and an iteration cap of 100. Throws NoConvergence with the
//! best iterate attached.
inline Vector solve_nonlinear(const std::function<Vector(const Vector&)>& g,
                              const Vector& x0, double tol = 1e-9) {
  const std::size_t m = x0.size();
  Vector x = x0;
  Vector gx = g(x);
  if (gx.size() != m) throw Error("solve_nonlinear: g must map m-vectors to m-vectors");
  double resid = max_abs(gx);
  Vector best_x = x;
  double best_resid = resid;
  const double fd_step = 1e-6;

  for (int iter = 0; iter < 100; ++iter) {
    if (resid <= tol) return x;
    Matrix jac(m, m);
    for (std::size_t j = 0; j < m; ++j) {
      Vector xp = x;
      const double h = fd_step * std::max(1.0, std::fabs(x[j]));
      xp[j] += h;
      const Vector gp = g(xp);
      for (std::size_t i = 0; i < m; ++i) jac(i, j) = (gp[i] - gx[i]) / h;
    }
    Vector step;
    try {
      Vector rhs(m);
      for (std::size_t i = 0; i < m; ++i) rhs[i] = -gx[i];
      step = solve_linear(jac, rhs);
    } catch (const Error&) {
      throw NoConvergence("solve_nonlinear: singular Jacobian", best_x);
    }
    double lambda = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving) {
      Vector xt(m);
      for (std::size_t i = 0; i < m; ++i) xt[i] = x[i] + lambda * step[i];
      Vector gt = g(xt);
      const double rt = max_abs(gt);
      if (rt < resid) {
        x = std::move(xt);
        gx = std::move(gt);
        resid = rt;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (resid < best_resid) {
      best_resid = resid;
      best_x = x;
    }
    if (!accepted) break;
  }
  if (resid <= tol) return x;
  throw NoConvergence("solve_nonlinear: residual above tolerance", best_x);
}

}  // namespace acr
