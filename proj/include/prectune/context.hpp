#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "prectune/kernels.hpp"

namespace prectune {

inline constexpr double kDeltaCond = 1e-16;
inline constexpr double kDeltaNorm = 1e-16;

/// Log-scale matrix features: phi1 = log10 of the condition estimate,
/// phi2 = log10 of the infinity norm, each floored before the log.
struct Context {
  double phi1 = 0.0;
  double phi2 = 0.0;

  double kappa() const;
};

enum class ConditionSource { estimate_1norm, exact_svd_2norm };
/// "estimate" / "svd"
std::string_view to_string(ConditionSource c);
std::optional<ConditionSource> parse_condition_source(std::string_view s);

Context extract_context(const DenseMatrix& a, ConditionSource source = ConditionSource::estimate_1norm);

/// Exact 2-norm condition number via SVD. Cost is O(n^3); intended for small n.
double exact_cond_2(const DenseMatrix& a);

struct FeatureBins {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n_bins = 10;

  /// clamp(floor((phi - lo) / (hi - lo) * n_bins), 0, n_bins - 1); a
  /// degenerate range maps everything to bin 0.
  std::size_t bin(double phi) const;
  double center(std::size_t b) const;

  friend bool operator==(const FeatureBins&, const FeatureBins&) = default;
};

struct BinSpec {
  FeatureBins cond;
  FeatureBins norm;

  std::size_t n_states() const { return cond.n_bins * norm.n_bins; }
  friend bool operator==(const BinSpec&, const BinSpec&) = default;
};

struct DiscreteState {
  std::size_t b1 = 0;
  std::size_t b2 = 0;
  std::size_t index = 0;
};

/// Bin ranges from the min/max over the training contexts.
BinSpec fit_bins(std::span<const Context> training, std::size_t n_cond_bins = 10, std::size_t n_norm_bins = 10);

DiscreteState discretize(const Context& ctx, const BinSpec& spec);

}  // namespace prectune
