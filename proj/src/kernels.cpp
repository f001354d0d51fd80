#include "prectune/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace prectune {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  if (data_.size() != rows_ * cols_) throw std::invalid_argument("DenseMatrix: entry count does not match shape");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> d) {
  DenseMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix quantize_matrix(const DenseMatrix& a, Format f) {
  DenseMatrix q = a;
  quantize_inplace(q.data(), f);
  return q;
}

std::string_view to_string(FactorFailure::Reason r) {
  switch (r) {
    case FactorFailure::Reason::zero_pivot:
      return "zero_pivot";
    case FactorFailure::Reason::overflow:
      return "overflow";
    case FactorFailure::Reason::nan:
      return "nan";
  }
  return "unknown";
}

Vector matvec(const DenseMatrix& a, std::span<const double> x, Format fmt) {
  if (a.cols() != x.size()) throw std::invalid_argument("matvec: dimension mismatch");
  const Rounder rnd(fmt);
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto row = a.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) acc = rnd.add(acc, rnd.mul(row[j], x[j]));
    y[i] = acc;
  }
  return y;
}

FactorResult lu_factor(const DenseMatrix& a, Format fmt) {
  if (!a.square()) throw std::invalid_argument("lu_factor: matrix must be square");
  const std::size_t n = a.rows();
  const Rounder rnd(fmt);

  LUFactors f{quantize_matrix(a, fmt), std::vector<std::size_t>(n), fmt};
  std::iota(f.pivot.begin(), f.pivot.end(), std::size_t{0});
  DenseMatrix& m = f.lu;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::fabs(m(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::fabs(m(i, k)) > best) {
        best = std::fabs(m(i, k));
        p = i;
      }
    }
    if (std::isnan(best)) return FactorFailure{FactorFailure::Reason::nan, k};
    if (std::isinf(best)) return FactorFailure{FactorFailure::Reason::overflow, k};
    if (best == 0.0) return FactorFailure{FactorFailure::Reason::zero_pivot, k};
    if (p != k) {
      std::swap_ranges(m.row(k).begin(), m.row(k).end(), m.row(p).begin());
      std::swap(f.pivot[k], f.pivot[p]);
    }

    const double pivot = m(k, k);
    const auto urow = m.row(k);
    for (std::size_t i = k + 1; i < n; ++i) {
      auto row = m.row(i);
      const double l = rnd.div(row[k], pivot);
      row[k] = l;
      if (l == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) row[j] = rnd.sub(row[j], rnd.mul(l, urow[j]));
    }
  }

  for (double v : m.data()) {
    if (std::isnan(v)) return FactorFailure{FactorFailure::Reason::nan, n};
  }
  for (double v : m.data()) {
    if (std::isinf(v)) return FactorFailure{FactorFailure::Reason::overflow, n};
  }
  return f;
}

Vector lu_solve(const LUFactors& f, std::span<const double> b, Format fmt) {
  const std::size_t n = f.size();
  if (b.size() != n) throw std::invalid_argument("lu_solve: dimension mismatch");
  const Rounder rnd(fmt);
  const DenseMatrix& m = f.lu;

  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = rnd(b[f.pivot[i]]);

  for (std::size_t i = 0; i < n; ++i) {
    const auto row = m.row(i);
    double s = y[i];
    for (std::size_t j = 0; j < i; ++j) s = rnd.sub(s, rnd.mul(row[j], y[j]));
    y[i] = s;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    const auto row = m.row(ii);
    double s = y[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s = rnd.sub(s, rnd.mul(row[j], y[j]));
    y[ii] = rnd.div(s, row[ii]);
  }
  return y;
}

Vector lu_solve_transposed(const LUFactors& f, std::span<const double> b) {
  // A^T = U^T L^T P: solve U^T w = b, L^T v = w, then x[pivot[i]] = v[i].
  const std::size_t n = f.size();
  if (b.size() != n) throw std::invalid_argument("lu_solve_transposed: dimension mismatch");
  const DenseMatrix& m = f.lu;
  Vector w(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = w[i];
    for (std::size_t j = 0; j < i; ++j) s -= m(j, i) * w[j];
    w[i] = s / m(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = w[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= m(j, ii) * w[j];
    w[ii] = s;
  }
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[f.pivot[i]] = w[i];
  return x;
}

LUFactors requantize(const LUFactors& f, Format fmt) {
  LUFactors out = f;
  quantize_inplace(out.lu.data(), fmt);
  out.fmt = fmt;
  return out;
}

double norm_inf(const DenseMatrix& a) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (double v : a.row(i)) s += std::fabs(v);
    best = std::max(best, s);
  }
  return best;
}

double norm_1(const DenseMatrix& a) {
  std::vector<double> col(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto row = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) col[j] += std::fabs(row[j]);
  }
  return col.empty() ? 0.0 : *std::max_element(col.begin(), col.end());
}

double norm_inf_vec(std::span<const double> v) {
  double best = 0.0;
  for (double x : v) {
    if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
    best = std::max(best, std::fabs(x));
  }
  return best;
}

namespace {

double sum_abs(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::fabs(x);
  return s;
}

}  // namespace

double condest_1(const DenseMatrix& a) {
  constexpr int kMaxIter = 5;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  const auto factored = lu_factor(a, Format::FP64);
  if (std::holds_alternative<FactorFailure>(factored)) return kInf;
  const auto& f = std::get<LUFactors>(factored);
  const std::size_t n = a.rows();
  if (n == 0) return 0.0;

  Vector x(n, 1.0 / static_cast<double>(n));
  double est = 0.0;
  for (int k = 0; k < kMaxIter; ++k) {
    const Vector y = lu_solve(f, x, Format::FP64);
    const double next = sum_abs(y);
    if (!std::isfinite(next)) return kInf;
    if (k > 0 && next <= est) break;
    est = next;

    Vector sgn(n);
    for (std::size_t i = 0; i < n; ++i) sgn[i] = y[i] >= 0.0 ? 1.0 : -1.0;
    const Vector z = lu_solve_transposed(f, sgn);
    std::size_t j = 0;
    double zmax = -1.0;
    double ztx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ztx += z[i] * x[i];
      if (std::fabs(z[i]) > zmax) {
        zmax = std::fabs(z[i]);
        j = i;
      }
    }
    if (k > 0 && zmax <= ztx) break;
    std::fill(x.begin(), x.end(), 0.0);
    x[j] = 1.0;
  }

  // Higham's alternating test vector guards against the power iteration
  // stalling on a poor direction.
  if (n > 1) {
    Vector alt(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = 1.0 + static_cast<double>(i) / static_cast<double>(n - 1);
      alt[i] = (i % 2 == 0) ? mag : -mag;
    }
    const double alt_est = 2.0 * sum_abs(lu_solve(f, alt, Format::FP64)) / (3.0 * static_cast<double>(n));
    est = std::max(est, alt_est);
  }
  return norm_1(a) * est;
}

}  // namespace prectune
