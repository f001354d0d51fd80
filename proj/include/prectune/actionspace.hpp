#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "prectune/gmres_ir.hpp"

namespace prectune {

/// Monotone precision 4-tuples over an ordered format menu.
class ActionSpace {
 public:
  ActionSpace() = default;
  ActionSpace(std::vector<Format> formats, std::vector<PrecisionAction> actions,
              std::optional<double> subsample_fraction = std::nullopt);

  const std::vector<Format>& formats() const { return formats_; }
  const std::vector<PrecisionAction>& actions() const { return actions_; }
  std::size_t size() const { return actions_.size(); }
  const PrecisionAction& operator[](std::size_t i) const { return actions_[i]; }
  std::optional<double> subsample_fraction() const { return fraction_; }

  std::optional<std::size_t> index_of(const PrecisionAction& a) const;

  friend bool operator==(const ActionSpace&, const ActionSpace&) = default;

 private:
  std::vector<Format> formats_;
  std::vector<PrecisionAction> actions_;
  std::optional<double> fraction_;
};

/// All nondecreasing 4-tuples, lexicographic in (u_f, u, u_g, u_r).
/// `formats` must be nonempty and strictly increasing.
ActionSpace enumerate_actions(std::vector<Format> formats);

/// Seeded subset of ceil(fraction * |space|) actions. The all-highest
/// action is always kept; the result stays in enumeration order.
ActionSpace subsample(const ActionSpace& space, double fraction, std::uint64_t seed);

/// Sum of significand bits over the four steps.
int action_cost_bits(const PrecisionAction& a);

/// C(m + k - 1, k)
std::size_t multiset_count(std::size_t m, std::size_t k);

/// The four formats used in the experiments.
std::vector<Format> default_formats();

}  // namespace prectune
