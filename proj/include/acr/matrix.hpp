#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "acr/errors.hpp"

namespace acr {

using Vector = std::vector<double>;

//! Dense row-major matrix. Small sizes only (weight vectors, covariances,
//! regression normal equations); no attempt at blocking or SIMD.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> entries)
      : rows_(rows), cols_(cols), a_(entries) {
    if (a_.size() != rows * cols) throw Error("matrix initializer size mismatch");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  const std::vector<double>& entries() const { return a_; }

  Vector multiply(const Vector& x) const {
    Vector y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) s += a_[i * cols_ + j] * x[j];
      y[i] = s;
    }
    return y;
  }

  bool finite() const {
    for (double v : a_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

inline double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double max_abs(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

//! Lower-triangular Cholesky factor of a symmetric positive definite matrix.
//! A pivot at or below 1e-12 times the largest diagonal entry is treated as
//! a modeling error, not something to patch with jitter.
inline Matrix cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  if (n != a.cols()) throw Error("cholesky: matrix not square");
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::fabs(a(i, i)));
  const double tol = 1e-12 * std::max(max_diag, 1e-300);

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tol)) throw NotPositiveDefinite("cholesky pivot below threshold");
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

//! Solve a x = b for symmetric positive definite a via Cholesky.
inline Vector solve_spd(const Matrix& a, const Vector& b) {
  const std::size_t n = a.rows();
  if (b.size() != n) throw Error("solve_spd: dimension mismatch");
  const Matrix l = cholesky(a);
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

//! Solve a general square system by LU with partial pivoting. Used for
//! Newton steps where the Jacobian has no structure worth exploiting.
inline Vector solve_linear(Matrix a, Vector b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw Error("solve_linear: dimension mismatch");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < n; ++i)
      if (std::fabs(a(i, col)) > std::fabs(a(piv, col))) piv = i;
    if (std::fabs(a(piv, col)) < 1e-300) throw Error("solve_linear: singular matrix");
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
      std::swap(b[piv], b[col]);
    }
    for (std::size_t i = col + 1; i < n; ++i) {
      const double f = a(i, col) / a(col, col);
      if (f == 0.0) continue;
      a(i, col) = 0.0;
      for (std::size_t j = col + 1; j < n; ++j) a(i, j) -= f * a(col, j);
      b[i] -= f * b[col];
    }
  }
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= a(ii, j) * x[j];
    x[ii] = s / a(ii, ii);
  }
  return x;
}

}  // namespace acr
