#include "prectune/fpemu.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>

namespace prectune {
namespace {

constexpr double max_finite(int t, int e_max) {
  // (2 - 2^(1-t)) * 2^e_max, built without std::ldexp so it stays constexpr.
  double scale = 1.0;
  for (int i = 0; i < e_max; ++i) scale *= 2.0;
  double ulp = 1.0;
  for (int i = 0; i < t - 1; ++i) ulp /= 2.0;
  return (2.0 - ulp) * scale;
}

constexpr double pow2_neg(int k) {
  double v = 1.0;
  for (int i = 0; i < k; ++i) v /= 2.0;
  return v;
}

constexpr std::array<FormatSpec, 5> kSpecs = {{
    {Format::BF16, "bf16", 8, -126, 127, pow2_neg(8), pow2_neg(126), max_finite(8, 127)},
    {Format::FP16, "fp16", 11, -14, 15, pow2_neg(11), pow2_neg(14), max_finite(11, 15)},
    {Format::TF32, "tf32", 11, -126, 127, pow2_neg(11), pow2_neg(126), max_finite(11, 127)},
    {Format::FP32, "fp32", 24, -126, 127, pow2_neg(24), pow2_neg(126), max_finite(24, 127)},
    {Format::FP64, "fp64", 53, -1022, 1023, pow2_neg(53), std::numeric_limits<double>::min(),
     std::numeric_limits<double>::max()},
}};

constexpr std::uint64_t kSignMask = 0x8000'0000'0000'0000ULL;

}  // namespace

const FormatSpec& spec(Format f) { return kSpecs[static_cast<std::size_t>(f)]; }

std::string_view format_name(Format f) { return spec(f).name; }

std::optional<Format> parse_format(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const auto& s : kSpecs) {
    if (s.name == lower) return s.id;
  }
  return std::nullopt;
}

double round_to(double x, Format f, Underflow mode) {
  const FormatSpec& s = spec(f);
  if (!std::isfinite(x) || x == 0.0) return x;
  if (s.t == 53 && mode == Underflow::gradual) return x;

  const auto bits = std::bit_cast<std::uint64_t>(x);
  const int biased = static_cast<int>((bits >> 52) & 0x7FF);
  const int exponent = biased - 1023;

  double result;
  if (biased != 0 && exponent >= s.e_min) {
    // Normal in the target: clear the low (53 - t) significand bits with
    // round-half-even. A carry out of the significand bumps the exponent.
    const int drop = 53 - s.t;
    if (drop == 0) {
      result = x;
    } else {
      std::uint64_t mag = bits & ~kSignMask;
      const std::uint64_t half = std::uint64_t{1} << (drop - 1);
      const std::uint64_t lsb = (mag >> drop) & 1U;
      mag += half - 1 + lsb;
      mag &= ~((std::uint64_t{1} << drop) - 1);
      result = std::bit_cast<double>(mag | (bits & kSignMask));
    }
  } else {
    // Subnormal in the target: fixed quantum 2^(e_min - t + 1).
    const int quantum = s.e_min - (s.t - 1);
    result = std::ldexp(std::nearbyint(std::ldexp(x, -quantum)), quantum);
  }

  if (std::fabs(result) > s.x_max) return std::copysign(std::numeric_limits<double>::infinity(), x);
  if (mode == Underflow::flush_to_zero && std::fabs(result) < s.x_min) return std::copysign(0.0, x);
  return result;
}

double rounded_binop(BinOp op, double a, double b, Format f) {
  switch (op) {
    case BinOp::add:
      return round_to(a + b, f);
    case BinOp::sub:
      return round_to(a - b, f);
    case BinOp::mul:
      return round_to(a * b, f);
    case BinOp::div:
      return round_to(a / b, f);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void quantize_inplace(std::span<double> v, Format f) {
  if (f == Format::FP64) return;
  for (double& x : v) x = round_to(x, f);
}

std::vector<double> quantize_vector(std::span<const double> v, Format f) {
  std::vector<double> out(v.begin(), v.end());
  quantize_inplace(out, f);
  return out;
}

}  // namespace prectune
