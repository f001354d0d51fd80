#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "prectune/fpemu.hpp"

namespace prectune {

using Vector = std::vector<double>;

/// Row-major dense matrix. Entries are stored at double precision; the
/// emulated kernels round after every operation.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  DenseMatrix transpose() const;
  bool all_finite() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix quantize_matrix(const DenseMatrix& a, Format f);

/// PA = LU with unit-lower L and U packed into one matrix.
/// Row i of PA is row pivot[i] of A.
struct LUFactors {
  DenseMatrix lu;
  std::vector<std::size_t> pivot;
  Format fmt = Format::FP64;

  std::size_t size() const { return pivot.size(); }
};

struct FactorFailure {
  enum class Reason { zero_pivot, overflow, nan };
  Reason reason;
  std::size_t step;
};

std::string_view to_string(FactorFailure::Reason r);

using FactorResult = std::variant<LUFactors, FactorFailure>;

/// y = A x with every multiply and add rounded to fmt, accumulated left to
/// right. A and x are expected to be representable in fmt already.
Vector matvec(const DenseMatrix& a, std::span<const double> x, Format fmt);

/// Partial-pivoting LU. The input is quantized to fmt first and every
/// elementary operation is rounded to fmt.
FactorResult lu_factor(const DenseMatrix& a, Format fmt);

/// Forward then back substitution in fmt. b is quantized on entry.
Vector lu_solve(const LUFactors& f, std::span<const double> b, Format fmt);

/// Solves A^T x = b at full precision. Used by the condition estimator.
Vector lu_solve_transposed(const LUFactors& f, std::span<const double> b);

/// Re-rounds stored factors to another format (used when the GMRES
/// precision differs from the factorization precision).
LUFactors requantize(const LUFactors& f, Format fmt);

double norm_inf(const DenseMatrix& a);
double norm_1(const DenseMatrix& a);
double norm_inf_vec(std::span<const double> v);

/// Hager-Higham lower bound on the 1-norm condition number, computed from an
/// FP64 LU. Returns +inf when the factorization fails.
double condest_1(const DenseMatrix& a);

}  // namespace prectune
