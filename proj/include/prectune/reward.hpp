#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "prectune/context.hpp"
#include "prectune/gmres_ir.hpp"

namespace prectune {

inline constexpr double kAccuracyFloor = 1e-10;  // C1
inline constexpr double kFailureValue = 5.0;     // C2

struct RewardWeights {
  double w1 = 1.0;  // accuracy
  double w2 = 1.0;  // precision
  double w3 = 1.0;  // iteration penalty

  void validate() const;
  friend bool operator==(const RewardWeights&, const RewardWeights&) = default;
};

/// "W1" -> (1, 0.1, 1), "W2" -> (1, 1, 1). Case-sensitive.
std::optional<RewardWeights> weights_preset(std::string_view name);

struct RewardOptions {
  /// Score failures as +C2 instead of -C2.
  bool literal_c2_sign = false;
};

struct RewardBreakdown {
  double f_precision = 0.0;
  double f_accuracy = 0.0;
  double f_penalty = 0.0;
  double total = 0.0;
  bool failed = false;
};

/// sum over the four steps of t(FP64) / (t(p) * (1 + log10(max(kappa, 1)))).
double precision_term(const PrecisionAction& a, double kappa);

/// -log10(max(err_distance, C1)) - log10(max(err_normalized, C1)), or the
/// failure value when either error exceeds 1 or is not finite.
double accuracy_term(double err_distance, double err_normalized, const RewardOptions& opts = {});

/// Same, computing both errors from the vectors.
double accuracy_term(std::span<const double> x_solve, std::span<const double> x_true, const DenseMatrix& a,
                     std::span<const double> b, const RewardOptions& opts = {});

double failure_accuracy(const RewardOptions& opts = {});

/// log2(max(T_iter, 1))
double penalty_term(int gmres_iters_total);

RewardBreakdown total_reward(const SolveReport& report, const Context& ctx, const RewardWeights& w,
                             const RewardOptions& opts = {});

}  // namespace prectune
