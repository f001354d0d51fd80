#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prectune/agent.hpp"
#include "prectune/context.hpp"
#include "prectune/gmres_ir.hpp"
#include "prectune/problems.hpp"
#include "prectune/reward.hpp"

namespace prectune {

struct TrainConfig {
  int episodes = 100;
  double alpha = 0.5;
  double eps_min = 0.01;
  std::string weights_name = "W1";
  RewardWeights weights = *weights_preset("W1");
  RewardOptions reward_options;
  StopConfig stop;
  std::uint64_t seed = 0;
  std::optional<double> subsample_fraction;
  double gamma = 0.0;  // ignored by the one-step update
  std::size_t n_cond_bins = 10;
  std::size_t n_norm_bins = 10;
  ConditionSource condition = ConditionSource::estimate_1norm;
  std::vector<Format> formats = default_formats();

  void validate() const;
};

struct EpisodeLog {
  int episode = 0;
  double mean_reward = 0.0;
  double mean_abs_rpe = 0.0;
  double epsilon = 0.0;
};

struct TrainResult {
  QTable q;
  std::vector<EpisodeLog> log;
};

/// Bandit training loop over the systems in the given order.
TrainResult train(std::span<const ProblemInstance> systems, const TrainConfig& cfg);
TrainResult train(const DatasetManifest& manifest, const TrainConfig& cfg);

struct EvalConfig {
  StopConfig stop;
  std::string weights_name = "W1";
  RewardWeights weights = *weights_preset("W1");
  RewardOptions reward_options;
  double tau_base = 1e-10;
  ConditionSource condition = ConditionSource::estimate_1norm;
  unsigned workers = 1;
};

struct SystemResult {
  std::string id;
  std::size_t n = 0;
  Family family = Family::dense_randsvd;
  double kappa_est = 0.0;
  double norm_inf = 0.0;
  std::optional<std::size_t> state_index;  // empty for fixed-action runs
  PrecisionAction action;
  SolveStatus status = SolveStatus::failed;
  int outer_iters = 0;
  int gmres_iters = 0;
  double ferr = 0.0;
  double nbe = 0.0;
  RewardBreakdown reward;
};

struct RangeRow {
  std::string range;  // "low", "medium", "high"
  std::size_t count = 0;
  double tau = 0.0;
  std::optional<double> xi;
  double avg_ferr = 0.0;
  double avg_nbe = 0.0;
  double avg_outer_iters = 0.0;
  double avg_gmres_iters = 0.0;
  double median_ferr = 0.0;
};

struct UsageRow {
  int decade = 0;  // systems with kappa in [10^decade, 10^(decade+1))
  std::size_t count = 0;
  std::array<double, kAllFormats.size()> avg_count{};  // indexed by Format
};

struct EvalSummary {
  std::string method;
  std::vector<SystemResult> systems;
  std::vector<RangeRow> ranges;
  std::vector<UsageRow> usage;
  std::vector<std::string> notes;
};

/// low [1, 1e3), medium [1e3, 1e6), high [1e6, inf). Values below 1 count as low.
std::string_view condition_range(double kappa);
int condition_decade(double kappa);

/// Groups per-system rows into range and decade tables. xi is computed only
/// when with_xi is set.
EvalSummary summarize(std::string method, std::vector<SystemResult> systems, double tau_base, bool with_xi);

using Policy = std::function<std::pair<PrecisionAction, std::optional<std::size_t>>(const Context&)>;

/// Solves every system with the action chosen by `policy`.
std::vector<SystemResult> run_policy(std::span<const ProblemInstance> systems, const Policy& policy,
                                     const EvalConfig& cfg);

EvalSummary evaluate(const QTable& q, std::span<const ProblemInstance> systems, const EvalConfig& cfg);
EvalSummary evaluate(const QTable& q, const DatasetManifest& manifest, const EvalConfig& cfg);

EvalSummary baseline_fp64(std::span<const ProblemInstance> systems, const EvalConfig& cfg);
EvalSummary baseline_fp64(const DatasetManifest& manifest, const EvalConfig& cfg);

std::vector<ProblemInstance> load_all(const DatasetManifest& manifest, unsigned workers = 1);

// CSV output. Numbers use the shortest round-trip decimal form.
inline constexpr std::string_view kSystemsHeader =
    "id,n,family,kappa_est,norm_inf,state_index,action,status,outer_iters,gmres_iters,ferr,nbe,reward,"
    "f_precision,f_accuracy,f_penalty";
inline constexpr std::string_view kEpisodesHeader = "episode,mean_reward,mean_abs_rpe,epsilon";
inline constexpr std::string_view kSummaryHeader =
    "method,range,num,xi,avg_ferr,avg_nbe,avg_iter,avg_gmres_iter,median_ferr,tau";
inline constexpr std::string_view kUsageHeader = "method,decade,num,bf16,fp16,tf32,fp32,fp64";

std::string systems_csv(const EvalSummary& s);
std::string summary_csv(std::span<const EvalSummary> summaries);
std::string usage_csv(std::span<const EvalSummary> summaries);
std::string episodes_csv(std::span<const EpisodeLog> log);

/// Writes summary.csv and usage.csv covering every summary, one
/// systems_<method>.csv per summary, and episodes.csv when the log is nonempty.
void report(std::span<const EvalSummary> summaries, std::span<const EpisodeLog> log,
            const std::filesystem::path& out_dir);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace prectune
