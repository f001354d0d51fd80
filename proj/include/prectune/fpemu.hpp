#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prectune {

/// Emulated floating-point formats, declared in ascending precision order.
/// FP16 and TF32 share t = 11; FP16 sorts first because TF32 carries the
/// wider FP32 exponent range.
enum class Format : int { BF16 = 0, FP16 = 1, TF32 = 2, FP32 = 3, FP64 = 4 };

inline constexpr std::array<Format, 5> kAllFormats = {Format::BF16, Format::FP16, Format::TF32,
                                                      Format::FP32, Format::FP64};

struct FormatSpec {
  Format id;
  std::string_view name;  // lowercase, as accepted on the command line
  int t;                  // significand bits including the implicit bit
  int e_min;
  int e_max;
  double u;      // unit roundoff 2^-t
  double x_min;  // smallest positive normal
  double x_max;  // largest finite
};

const FormatSpec& spec(Format f);

inline int significand_bits(Format f) { return spec(f).t; }
inline double unit_roundoff(Format f) { return spec(f).u; }
std::string_view format_name(Format f);

/// Case-insensitive lookup of "bf16", "fp16", "tf32", "fp32", "fp64".
std::optional<Format> parse_format(std::string_view name);

/// Strict total order: t ascending, FP16 before TF32.
constexpr bool precision_less(Format a, Format b) { return static_cast<int>(a) < static_cast<int>(b); }

enum class Underflow { gradual, flush_to_zero };

/// Round to nearest, ties to even. Overflow goes to ±inf, NaN passes through,
/// and values under the subnormal range go to signed zero. With
/// Underflow::flush_to_zero, any result below x_min becomes signed zero.
double round_to(double x, Format f, Underflow mode = Underflow::gradual);

enum class BinOp { add, sub, mul, div };

/// fl(a op b): exact operation in double, then one rounding to f.
double rounded_binop(BinOp op, double a, double b, Format f);

void quantize_inplace(std::span<double> v, Format f);
std::vector<double> quantize_vector(std::span<const double> v, Format f);

/// Callable that rounds to a fixed format; used by the emulated kernels.
class Rounder {
 public:
  explicit Rounder(Format f, Underflow mode = Underflow::gradual) : fmt_(f), mode_(mode) {}

  double operator()(double x) const { return round_to(x, fmt_, mode_); }
  double add(double a, double b) const { return (*this)(a + b); }
  double sub(double a, double b) const { return (*this)(a - b); }
  double mul(double a, double b) const { return (*this)(a * b); }
  double div(double a, double b) const { return (*this)(a / b); }
  Format format() const { return fmt_; }

 private:
  Format fmt_;
  Underflow mode_;
};

}  // namespace prectune
