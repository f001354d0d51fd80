#include "prectune/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prectune {

void RewardWeights::validate() const {
  if (!(w1 > 0.0) || !(w2 > 0.0)) throw std::invalid_argument("RewardWeights: w1 and w2 must be positive");
  if (!(w3 >= 0.0)) throw std::invalid_argument("RewardWeights: w3 must be non-negative");
}

std::optional<RewardWeights> weights_preset(std::string_view name) {
  if (name == "W1") return RewardWeights{1.0, 0.1, 1.0};
  if (name == "W2") return RewardWeights{1.0, 1.0, 1.0};
  return std::nullopt;
}

double precision_term(const PrecisionAction& a, double kappa) {
  const double scale = 1.0 + std::log10(std::max(kappa, 1.0));
  const double t64 = significand_bits(Format::FP64);
  double sum = 0.0;
  for (Format f : a.steps()) sum += t64 / significand_bits(f);
  return sum / scale;
}

double failure_accuracy(const RewardOptions& opts) { return opts.literal_c2_sign ? kFailureValue : -kFailureValue; }

double accuracy_term(double err_distance, double err_normalized, const RewardOptions& opts) {
  if (!std::isfinite(err_distance) || !std::isfinite(err_normalized) || err_distance > 1.0 || err_normalized > 1.0)
    return failure_accuracy(opts);
  return -std::log10(std::max(err_distance, kAccuracyFloor)) - std::log10(std::max(err_normalized, kAccuracyFloor));
}

double accuracy_term(std::span<const double> x_solve, std::span<const double> x_true, const DenseMatrix& a,
                     std::span<const double> b, const RewardOptions& opts) {
  const double ferr = compute_errors(x_solve, x_true, a, b).ferr;
  const double normalized = ferr / (norm_inf(a) * norm_inf_vec(x_true) + norm_inf_vec(b));
  return accuracy_term(ferr, normalized, opts);
}

double penalty_term(int gmres_iters_total) { return std::log2(static_cast<double>(std::max(gmres_iters_total, 1))); }

RewardBreakdown total_reward(const SolveReport& report, const Context& ctx, const RewardWeights& w,
                             const RewardOptions& opts) {
  RewardBreakdown r;
  const bool solver_failed = report.status == SolveStatus::failed;
  r.f_precision = precision_term(report.action, ctx.kappa());
  r.f_accuracy = solver_failed ? failure_accuracy(opts) : accuracy_term(report.ferr, report.err_normalized, opts);
  r.failed = solver_failed || !std::isfinite(report.ferr) || !std::isfinite(report.err_normalized) ||
             report.ferr > 1.0 || report.err_normalized > 1.0;
  r.f_penalty = penalty_term(report.gmres_iters_total);
  r.total = w.w2 * r.f_precision + w.w1 * r.f_accuracy - w.w3 * r.f_penalty;
  return r;
}

}  // namespace prectune
