#pragma once

// Reference implementations used by the unit and acceptance tests. They are
// written independently of the library kernels (different data layout,
// different rounding entry point) but perform the same operations in the
// same order, so results must agree bit for bit.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "prectune/fpemu.hpp"
#include "prectune/kernels.hpp"

namespace oracle {

using prectune::Format;
using Mat = std::vector<std::vector<double>>;

/// Rounding by scaling: pick the exponent with frexp, divide by the quantum,
/// round to nearest even with nearbyint, scale back.
inline double round_scaled(double x, Format f) {
  const auto& s = prectune::spec(f);
  if (x == 0.0 || !std::isfinite(x)) return x;
  int e = 0;
  std::frexp(std::fabs(x), &e);  // |x| = m 2^e, m in [0.5, 1)
  const int exponent = std::max(e - 1, s.e_min);
  const double quantum = std::ldexp(1.0, exponent - s.t + 1);
  const double r = std::nearbyint(x / quantum) * quantum;
  if (std::fabs(r) > s.x_max) return std::copysign(std::numeric_limits<double>::infinity(), x);
  return r;
}

inline double fl(double v, Format f) { return prectune::round_to(v, f); }

inline Mat to_rows(const prectune::DenseMatrix& a) {
  Mat m(a.rows(), std::vector<double>(a.cols()));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m[i][j] = a(i, j);
  return m;
}

inline std::vector<double> matvec(const Mat& a, const std::vector<double>& x, Format f) {
  std::vector<double> y;
  for (const auto& row : a) {
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) acc = fl(acc + fl(row[j] * x[j], f), f);
    y.push_back(acc);
  }
  return y;
}

struct LU {
  Mat lu;
  std::vector<std::size_t> perm;
};

/// Textbook Doolittle elimination with partial pivoting; nullopt on a zero pivot.
inline std::optional<LU> lu(Mat a, Format f) {
  const std::size_t n = a.size();
  for (auto& row : a)
    for (double& v : row) v = fl(v, f);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(a[i][k]) > std::fabs(a[p][k])) p = i;
    if (a[p][k] == 0.0) return std::nullopt;
    std::swap(a[p], a[k]);
    std::swap(perm[p], perm[k]);
    for (std::size_t i = k + 1; i < n; ++i) {
      a[i][k] = fl(a[i][k] / a[k][k], f);
      if (a[i][k] == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) a[i][j] = fl(a[i][j] - fl(a[i][k] * a[k][j], f), f);
    }
  }
  return LU{a, perm};
}

inline std::vector<double> solve(const LU& d, const std::vector<double>& b, Format f) {
  const std::size_t n = b.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = fl(b[d.perm[i]], f);
    for (std::size_t j = 0; j < i; ++j) s = fl(s - fl(d.lu[i][j] * y[j], f), f);
    y[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t j = i + 1; j < n; ++j) s = fl(s - fl(d.lu[i][j] * y[j], f), f);
    y[i] = fl(s / d.lu[i][i], f);
  }
  return y;
}

/// Gauss-Jordan inverse in long double; nullopt when singular.
inline std::optional<std::vector<std::vector<long double>>> inverse(const prectune::DenseMatrix& a) {
  const std::size_t n = a.rows();
  std::vector<std::vector<long double>> m(n, std::vector<long double>(2 * n, 0.0L));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i][j] = a(i, j);
    m[i][n + i] = 1.0L;
  }
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(m[i][k]) > std::fabs(m[p][k])) p = i;
    if (m[p][k] == 0.0L) return std::nullopt;
    std::swap(m[p], m[k]);
    const long double piv = m[k][k];
    for (auto& v : m[k]) v /= piv;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k) continue;
      const long double l = m[i][k];
      for (std::size_t j = 0; j < 2 * n; ++j) m[i][j] -= l * m[k][j];
    }
  }
  std::vector<std::vector<long double>> inv(n, std::vector<long double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) inv[i][j] = m[i][n + j];
  return inv;
}

/// Exact 1-norm condition number from the long-double inverse.
inline double kappa_1(const prectune::DenseMatrix& a) {
  const auto inv = inverse(a);
  if (!inv) return std::numeric_limits<double>::infinity();
  long double best = 0.0L;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < a.rows(); ++i) s += std::fabs((*inv)[i][j]);
    best = std::max(best, s);
  }
  return prectune::norm_1(a) * static_cast<double>(best);
}

inline prectune::DenseMatrix random_matrix(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  prectune::DenseMatrix a(n, n);
  for (double& v : a.data()) v = nd(rng);
  return a;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

}  // namespace oracle
