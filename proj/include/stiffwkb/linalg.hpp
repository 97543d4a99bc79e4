#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace stiffwkb {

// ----------------------------------------------------------------------------
// Fixed 4-vectors and 4x4 matrices (the WKB amplitude space)
// ----------------------------------------------------------------------------

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<std::array<double, 4>, 4>;

inline Vec4 operator+(const Vec4& a, const Vec4& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}
inline Vec4 operator-(const Vec4& a, const Vec4& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]};
}
inline Vec4 operator*(double s, const Vec4& a) { return {s * a[0], s * a[1], s * a[2], s * a[3]}; }

inline double dot(const Vec4& a, const Vec4& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}

inline double norm_inf(const Vec4& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline Mat4 zero_mat4() { return Mat4{}; }

inline Mat4 identity_mat4() {
  Mat4 m{};
  for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
  return m;
}

inline Vec4 operator*(const Mat4& m, const Vec4& v) {
  Vec4 r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i] += m[i][j] * v[j];
  return r;
}

inline Mat4 operator*(const Mat4& a, const Mat4& b) {
  Mat4 r{};
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k)
      for (int j = 0; j < 4; ++j) r[i][j] += a[i][k] * b[k][j];
  return r;
}

inline Mat4 operator+(const Mat4& a, const Mat4& b) {
  Mat4 r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = a[i][j] + b[i][j];
  return r;
}

inline Mat4 operator-(const Mat4& a, const Mat4& b) {
  Mat4 r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = a[i][j] - b[i][j];
  return r;
}

inline Mat4 operator*(double s, const Mat4& a) {
  Mat4 r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = s * a[i][j];
  return r;
}

inline Mat4 transpose(const Mat4& a) {
  Mat4 r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = a[j][i];
  return r;
}

inline double max_abs(const Mat4& a) {
  double m = 0.0;
  for (const auto& row : a)
    for (double v : row) m = std::max(m, std::abs(v));
  return m;
}

/// Cofactor expansion; exact for small-integer entries.
inline double det(const Mat4& m) {
  auto det3 = [&](int c0, int c1, int c2, int r0, int r1, int r2) {
    return m[r0][c0] * (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) -
           m[r0][c1] * (m[r1][c0] * m[r2][c2] - m[r1][c2] * m[r2][c0]) +
           m[r0][c2] * (m[r1][c0] * m[r2][c1] - m[r1][c1] * m[r2][c0]);
  };
  return m[0][0] * det3(1, 2, 3, 1, 2, 3) - m[0][1] * det3(0, 2, 3, 1, 2, 3) +
         m[0][2] * det3(0, 1, 3, 1, 2, 3) - m[0][3] * det3(0, 1, 2, 1, 2, 3);
}

// ----------------------------------------------------------------------------
// Small dense solves
// ----------------------------------------------------------------------------

/// Gaussian elimination with partial pivoting on a row-major n x n matrix.
/// Throws std::domain_error on an exactly singular pivot.
inline std::vector<double> dense_solve(std::vector<double> a, std::vector<double> rhs) {
  const std::size_t n = rhs.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i * n + k]) > std::abs(a[piv * n + k])) piv = i;
    if (a[piv * n + k] == 0.0) throw std::domain_error("dense_solve: singular matrix");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[piv * n + j]);
      std::swap(rhs[k], rhs[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i * n + k] / a[k * n + k];
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
      rhs[i] -= f * rhs[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i * n + j] * x[j];
    x[i] = s / a[i * n + i];
  }
  return x;
}

inline Vec4 solve(const Mat4& m, const Vec4& rhs) {
  std::vector<double> a(16);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a[i * 4 + j] = m[i][j];
  auto x = dense_solve(std::move(a), {rhs.begin(), rhs.end()});
  return {x[0], x[1], x[2], x[3]};
}

/// Least-squares polynomial fit y ~ sum_{j<=degree} c_j x^j (normal equations
/// on centred/scaled abscissae). Returns coefficients in the original variable
/// only for the constant term and slope use-cases via evaluation.
struct PolyFit {
  std::vector<double> coeffs;  // in powers of x
  double operator()(double x) const {
    double s = 0.0;
    for (std::size_t j = coeffs.size(); j-- > 0;) s = s * x + coeffs[j];
    return s;
  }
};

inline PolyFit polyfit(std::span<const double> xs, std::span<const double> ys, int degree) {
  const std::size_t m = static_cast<std::size_t>(degree) + 1;
  if (xs.size() != ys.size() || xs.size() < m)
    throw std::invalid_argument("polyfit: need at least degree+1 points");
  std::vector<double> ata(m * m, 0.0), atb(m, 0.0);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    std::vector<double> p(m);
    p[0] = 1.0;
    for (std::size_t j = 1; j < m; ++j) p[j] = p[j - 1] * xs[k];
    for (std::size_t i = 0; i < m; ++i) {
      atb[i] += p[i] * ys[k];
      for (std::size_t j = 0; j < m; ++j) ata[i * m + j] += p[i] * p[j];
    }
  }
  return PolyFit{dense_solve(std::move(ata), std::move(atb))};
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("loglog_slope: need at least two points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = std::log(xs[i]) - mx;
    sxy += dx * (std::log(ys[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace stiffwkb
