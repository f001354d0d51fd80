#include "prectune/context.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace prectune {

double Context::kappa() const { return std::pow(10.0, phi1); }

double exact_cond_2(const DenseMatrix& a) {
  Eigen::MatrixXd m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a(i, j);
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 0.0;
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

Context extract_context(const DenseMatrix& a, ConditionSource source) {
  if (!a.square()) throw std::invalid_argument("extract_context: matrix must be square");
  double kappa = source == ConditionSource::estimate_1norm ? condest_1(a) : exact_cond_2(a);
  // A singular matrix gives +inf; keep the feature finite and let the bins clip it.
  if (!std::isfinite(kappa)) kappa = std::numeric_limits<double>::max();
  return {std::log10(std::max(kappa, kDeltaCond)), std::log10(std::max(norm_inf(a), kDeltaNorm))};
}

std::size_t FeatureBins::bin(double phi) const {
  if (n_bins <= 1 || !(hi > lo)) return 0;
  if (std::isnan(phi)) return 0;
  const double pos = std::floor((phi - lo) / (hi - lo) * static_cast<double>(n_bins));
  if (pos <= 0.0) return 0;
  const auto last = static_cast<double>(n_bins - 1);
  return static_cast<std::size_t>(std::min(pos, last));
}

double FeatureBins::center(std::size_t b) const {
  if (!(hi > lo)) return lo;
  return lo + (static_cast<double>(b) + 0.5) * (hi - lo) / static_cast<double>(n_bins);
}

BinSpec fit_bins(std::span<const Context> training, std::size_t n_cond_bins, std::size_t n_norm_bins) {
  if (training.empty()) throw std::invalid_argument("fit_bins: need at least one training context");
  if (n_cond_bins == 0 || n_norm_bins == 0) throw std::invalid_argument("fit_bins: bin counts must be positive");
  BinSpec spec;
  spec.cond = {training.front().phi1, training.front().phi1, n_cond_bins};
  spec.norm = {training.front().phi2, training.front().phi2, n_norm_bins};
  for (const Context& c : training) {
    spec.cond.lo = std::min(spec.cond.lo, c.phi1);
    spec.cond.hi = std::max(spec.cond.hi, c.phi1);
    spec.norm.lo = std::min(spec.norm.lo, c.phi2);
    spec.norm.hi = std::max(spec.norm.hi, c.phi2);
  }
  return spec;
}

DiscreteState discretize(const Context& ctx, const BinSpec& spec) {
  DiscreteState s;
  s.b1 = spec.cond.bin(ctx.phi1);
  s.b2 = spec.norm.bin(ctx.phi2);
  s.index = s.b1 * spec.norm.n_bins + s.b2;
  return s;
}

std::string_view to_string(ConditionSource c) {
  return c == ConditionSource::exact_svd_2norm ? "svd" : "estimate";
}

std::optional<ConditionSource> parse_condition_source(std::string_view s) {
  if (s == "estimate") return ConditionSource::estimate_1norm;
  if (s == "svd") return ConditionSource::exact_svd_2norm;
  return std::nullopt;
}

}  // namespace prectune
