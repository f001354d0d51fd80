#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prectune/actionspace.hpp"
#include "prectune/context.hpp"
#include "prectune/gmres_ir.hpp"

namespace prectune {

struct EpsilonSchedule {
  int total_episodes = 100;
  double eps_min = 0.01;

  void validate() const;
  friend bool operator==(const EpsilonSchedule&, const EpsilonSchedule&) = default;
};

/// max(eps_min, 1 - t / T)
double epsilon_at(int t, const EpsilonSchedule& sched);

/// Tabular action values over (discrete state, action index), zero-initialized.
class QTable {
 public:
  QTable() = default;
  QTable(BinSpec bins, ActionSpace space, double alpha);

  std::size_t n_states() const { return bins_.n_states(); }
  std::size_t n_actions() const { return space_.size(); }

  double value(std::size_t state, std::size_t action) const { return values_[state * n_actions() + action]; }
  std::uint64_t visits(std::size_t state, std::size_t action) const { return counts_[state * n_actions() + action]; }
  std::span<const double> row(std::size_t state) const { return {values_.data() + state * n_actions(), n_actions()}; }
  void set_value(std::size_t state, std::size_t action, double v) { values_[state * n_actions() + action] = v; }

  const BinSpec& bins() const { return bins_; }
  const ActionSpace& space() const { return space_; }
  double alpha() const { return alpha_; }

  /// One-step bandit update Q += alpha (R - Q). Returns R - Q before the update.
  double update(std::size_t state, std::size_t action, double reward);

  /// Argmax over the row; ties go to the fewest significand bits, then the
  /// lowest index.
  std::size_t greedy(std::size_t state) const;

  // Run metadata carried with the table so that a saved model is self-describing.
  EpsilonSchedule schedule;
  std::uint64_t seed = 0;
  double gamma = 0.0;  // accepted for interface parity; the bandit update does not use it
  double tau_conv = 1e-6;
  std::string weights_name;
  ConditionSource condition = ConditionSource::estimate_1norm;
  StopRule stop_rule = StopRule::tolerance;

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  friend QTable parse_qtable(const std::string& text);

  BinSpec bins_;
  ActionSpace space_;
  double alpha_ = 0.5;
  std::vector<double> values_;
  std::vector<std::uint64_t> counts_;
};

using Rng = std::mt19937_64;

std::size_t select_action(const QTable& q, const DiscreteState& s, double eps, Rng& rng);

PrecisionAction infer(const QTable& q, const Context& ctx);

class QTableLoadError : public std::runtime_error {
 public:
  enum class Kind { io, malformed, version_mismatch, shape_mismatch, unknown_format };
  QTableLoadError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr int kQTableFormatVersion = 1;

std::string serialize_qtable(const QTable& q);
QTable parse_qtable(const std::string& text);
void save_qtable(const QTable& q, const std::filesystem::path& path);
QTable load_qtable(const std::filesystem::path& path);

}  // namespace prectune
