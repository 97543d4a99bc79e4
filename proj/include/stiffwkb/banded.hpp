#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace stiffwkb {

/// Symmetric band matrix, lower band stored row-wise: (i, j) with i-bw <= j <= i.
class SymBandMatrix {
 public:
  SymBandMatrix() = default;
  SymBandMatrix(std::size_t n, std::size_t bw) : n_(n), bw_(bw), a_(n * (bw + 1), 0.0) {}

  std::size_t size() const { return n_; }
  std::size_t bandwidth() const { return bw_; }

  double operator()(std::size_t i, std::size_t j) const {
    if (j > i) std::swap(i, j);
    if (i - j > bw_) return 0.0;
    return a_[i * (bw_ + 1) + (i - j)];
  }

  void add(std::size_t i, std::size_t j, double v) {
    if (j > i) std::swap(i, j);
    if (i - j > bw_) throw std::out_of_range("SymBandMatrix::add outside band");
    a_[i * (bw_ + 1) + (i - j)] += v;
  }

  std::vector<double> multiply(const std::vector<double>& x) const {
    std::vector<double> y(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t j0 = i >= bw_ ? i - bw_ : 0;
      for (std::size_t j = j0; j < i; ++j) {
        const double v = a_[i * (bw_ + 1) + (i - j)];
        y[i] += v * x[j];
        y[j] += v * x[i];
      }
      y[i] += a_[i * (bw_ + 1)] * x[i];
    }
    return y;
  }

  /// this + s * other (same shape).
  SymBandMatrix axpy(double s, const SymBandMatrix& other) const {
    SymBandMatrix r = *this;
    for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] += s * other.a_[k];
    return r;
  }

  double norm_inf() const {
    double m = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      const std::size_t j0 = i >= bw_ ? i - bw_ : 0;
      const std::size_t j1 = std::min(n_ - 1, i + bw_);
      for (std::size_t j = j0; j <= j1; ++j) s += std::abs((*this)(i, j));
      m = std::max(m, s);
    }
    return m;
  }

 private:
  friend class BandLdlt;
  std::size_t n_ = 0;
  std::size_t bw_ = 0;
  std::vector<double> a_;
};

/// Unpivoted band LDL^t. The number of negative pivots is the number of
/// eigenvalues below the shift (Sylvester inertia) when the factorization
/// exists; `singular()` flags a pivot that vanished to working precision.
class BandLdlt {
 public:
  explicit BandLdlt(const SymBandMatrix& a) : n_(a.n_), bw_(a.bw_), l_(a.a_), d_(a.n_, 0.0) {
    const double scale = std::max(a.norm_inf(), 1e-300);
    const std::size_t w = bw_ + 1;
    for (std::size_t j = 0; j < n_; ++j) {
      const std::size_t k0 = j >= bw_ ? j - bw_ : 0;
      double dj = l_[j * w];
      for (std::size_t k = k0; k < j; ++k) {
        const double ljk = l_[j * w + (j - k)];
        dj -= ljk * ljk * d_[k];
      }
      d_[j] = dj;
      if (std::abs(dj) <= 1e-15 * scale) {
        singular_ = true;
        if (dj == 0.0) d_[j] = dj = 1e-300;
      }
      if (dj < 0.0) ++negative_;
      const std::size_t i1 = std::min(n_ - 1, j + bw_);
      for (std::size_t i = j + 1; i <= i1; ++i) {
        const std::size_t kk0 = i >= bw_ ? i - bw_ : 0;
        double s = l_[i * w + (i - j)];
        for (std::size_t k = kk0; k < j; ++k) s -= l_[i * w + (i - k)] * l_[j * w + (j - k)] * d_[k];
        l_[i * w + (i - j)] = s / dj;
      }
    }
  }

  std::size_t negative_count() const { return negative_; }
  bool singular() const { return singular_; }
  const std::vector<double>& pivots() const { return d_; }

  std::vector<double> solve(std::vector<double> b) const {
    const std::size_t w = bw_ + 1;
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t k0 = i >= bw_ ? i - bw_ : 0;
      for (std::size_t k = k0; k < i; ++k) b[i] -= l_[i * w + (i - k)] * b[k];
    }
    for (std::size_t i = 0; i < n_; ++i) b[i] /= d_[i];
    for (std::size_t i = n_; i-- > 0;) {
      const std::size_t k1 = std::min(n_ - 1, i + bw_);
      for (std::size_t k = i + 1; k <= k1; ++k) b[i] -= l_[k * w + (k - i)] * b[k];
    }
    return b;
  }

 private:
  std::size_t n_;
  std::size_t bw_;
  std::vector<double> l_;
  std::vector<double> d_;
  std::size_t negative_ = 0;
  bool singular_ = false;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace stiffwkb
