#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "s2f/error.hpp"

namespace s2f {

using Vector = std::vector<double>;

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

/// y = M x + b
inline Vector affine(const Matrix& m, std::span<const double> x, std::span<const double> b) {
  if (x.size() != m.cols || b.size() != m.rows)
    fail(ErrorCode::DimMismatch, "affine: matrix is " + std::to_string(m.rows) + "x" +
                                     std::to_string(m.cols) + ", input has " +
                                     std::to_string(x.size()));
  Vector y(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) y[r] = dot(m.row(r), x) + b[r];
  return y;
}

/// Scales to unit L2 norm in place; the zero vector is left unchanged.
inline void normalize_l2(std::span<double> v) {
  const double n = std::sqrt(squared_norm(v));
  if (n == 0.0) return;
  for (double& x : v) x /= n;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace s2f
