#include "prectune/actionspace.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace prectune {

ActionSpace::ActionSpace(std::vector<Format> formats, std::vector<PrecisionAction> actions,
                         std::optional<double> subsample_fraction)
    : formats_(std::move(formats)), actions_(std::move(actions)), fraction_(subsample_fraction) {
  for (const auto& a : actions_) {
    if (!a.monotone()) throw std::invalid_argument("ActionSpace: action " + to_string(a) + " is not monotone");
  }
}

std::optional<std::size_t> ActionSpace::index_of(const PrecisionAction& a) const {
  const auto it = std::find(actions_.begin(), actions_.end(), a);
  if (it == actions_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - actions_.begin());
}

ActionSpace enumerate_actions(std::vector<Format> formats) {
  if (formats.empty()) throw std::invalid_argument("enumerate_actions: empty format list");
  for (std::size_t i = 1; i < formats.size(); ++i) {
    if (!precision_less(formats[i - 1], formats[i]))
      throw std::invalid_argument("enumerate_actions: formats must be strictly increasing");
  }
  const std::size_t m = formats.size();
  std::vector<PrecisionAction> actions;
  actions.reserve(multiset_count(m, 4));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b)
      for (std::size_t c = b; c < m; ++c)
        for (std::size_t d = c; d < m; ++d) actions.push_back({formats[a], formats[b], formats[c], formats[d]});
  return ActionSpace(std::move(formats), std::move(actions));
}

ActionSpace subsample(const ActionSpace& space, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("subsample: fraction must lie in (0,1]");
  if (space.size() == 0) return space;
  const std::size_t total = space.size();
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(total) - 1e-12));
  if (keep >= total) return ActionSpace(space.formats(), space.actions(), fraction);

  const Format top = space.formats().back();
  const PrecisionAction safest{top, top, top, top};
  const auto safe_index = space.index_of(safest);

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < total; ++i) {
    if (!safe_index || i != *safe_index) pool.push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);

  std::vector<std::size_t> chosen;
  if (safe_index) chosen.push_back(*safe_index);
  for (std::size_t i = 0; chosen.size() < keep && i < pool.size(); ++i) chosen.push_back(pool[i]);
  std::sort(chosen.begin(), chosen.end());

  std::vector<PrecisionAction> actions;
  actions.reserve(chosen.size());
  for (std::size_t i : chosen) actions.push_back(space[i]);
  return ActionSpace(space.formats(), std::move(actions), fraction);
}

int action_cost_bits(const PrecisionAction& a) {
  int bits = 0;
  for (Format f : a.steps()) bits += significand_bits(f);
  return bits;
}

std::size_t multiset_count(std::size_t m, std::size_t k) {
  // C(m + k - 1, k) by the multiplicative formula; exact at every step.
  std::size_t num = 1;
  for (std::size_t i = 1; i <= k; ++i) num = num * (m + k - i) / i;
  return num;
}

std::vector<Format> default_formats() { return {Format::BF16, Format::TF32, Format::FP32, Format::FP64}; }

}  // namespace prectune
