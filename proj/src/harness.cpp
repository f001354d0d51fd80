#include "prectune/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "prectune/matrix_market.hpp"

namespace prectune {
namespace {

using mm::format_double;

template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  const unsigned nthreads = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(nthreads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::string slug(std::string_view method) {
  std::string out;
  for (char c : method) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (episodes < 1) throw std::invalid_argument("TrainConfig: episodes must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("TrainConfig: alpha must lie in (0,1]");
  if (!(eps_min >= 0.0 && eps_min <= 1.0)) throw std::invalid_argument("TrainConfig: eps_min must lie in [0,1]");
  if (n_cond_bins < 1 || n_norm_bins < 1) throw std::invalid_argument("TrainConfig: bin counts must be >= 1");
  if (subsample_fraction && !(*subsample_fraction > 0.0 && *subsample_fraction <= 1.0))
    throw std::invalid_argument("TrainConfig: subsample fraction must lie in (0,1]");
  weights.validate();
  stop.validate();
}

TrainResult train(std::span<const ProblemInstance> systems, const TrainConfig& cfg) {
  cfg.validate();
  if (systems.empty()) throw std::invalid_argument("train: the training split is empty");

  std::vector<Context> contexts;
  contexts.reserve(systems.size());
  for (const auto& p : systems) contexts.push_back(extract_context(p.a, cfg.condition));
  std::vector<DiscreteState> states;

  ActionSpace space = enumerate_actions(cfg.formats);
  if (cfg.subsample_fraction) space = subsample(space, *cfg.subsample_fraction, cfg.seed);

  TrainResult out;
  out.q = QTable(fit_bins(contexts, cfg.n_cond_bins, cfg.n_norm_bins), space, cfg.alpha);
  QTable& q = out.q;
  q.schedule = {cfg.episodes, cfg.eps_min};
  q.seed = cfg.seed;
  q.gamma = cfg.gamma;
  q.tau_conv = cfg.stop.tau_conv;
  q.weights_name = cfg.weights_name;
  q.condition = cfg.condition;
  q.stop_rule = cfg.stop.rule;
  for (const auto& c : contexts) states.push_back(discretize(c, q.bins()));

  // The solver is deterministic, so each (system, action) pair is solved once.
  std::vector<std::map<std::size_t, RewardBreakdown>> memo(systems.size());
  Rng rng(cfg.seed);

  for (int t = 1; t <= cfg.episodes; ++t) {
    const double eps = epsilon_at(t, q.schedule);
    double sum_reward = 0.0;
    double sum_rpe = 0.0;
    for (std::size_t j = 0; j < systems.size(); ++j) {
      const std::size_t a = select_action(q, states[j], eps, rng);
      auto it = memo[j].find(a);
      if (it == memo[j].end()) {
        const auto& p = systems[j];
        const SolveReport rep = solve_gmres_ir(p.a, p.b, space[a], cfg.stop, std::span<const double>(p.x_true));
        it = memo[j].emplace(a, total_reward(rep, contexts[j], cfg.weights, cfg.reward_options)).first;
      }
      const double r = it->second.total;
      sum_reward += r;
      sum_rpe += std::fabs(q.update(states[j].index, a, r));
    }
    const auto count = static_cast<double>(systems.size());
    out.log.push_back({t, sum_reward / count, sum_rpe / count, eps});
  }
  return out;
}

TrainResult train(const DatasetManifest& manifest, const TrainConfig& cfg) {
  if (manifest.instances.empty()) throw std::invalid_argument("train: the training split is empty");
  const auto systems = load_all(manifest);
  return train(systems, cfg);
}

std::string_view condition_range(double kappa) {
  if (!(kappa >= 1e3)) return "low";
  if (kappa < 1e6) return "medium";
  return "high";
}

int condition_decade(double kappa) {
  if (!(kappa >= 1.0)) return 0;
  if (!std::isfinite(kappa)) return 308;
  return static_cast<int>(std::floor(std::log10(kappa)));
}

EvalSummary summarize(std::string method, std::vector<SystemResult> systems, double tau_base, bool with_xi) {
  EvalSummary out;
  out.method = std::move(method);

  for (std::string_view range : {"low", "medium", "high"}) {
    std::vector<const SystemResult*> members;
    for (const auto& s : systems)
      if (condition_range(s.kappa_est) == range) members.push_back(&s);
    if (members.empty()) {
      out.notes.push_back("range " + std::string(range) + " has no systems; row omitted");
      continue;
    }
    RangeRow row;
    row.range = std::string(range);
    row.count = members.size();
    std::vector<double> kappas, ferrs;
    std::size_t ok = 0;
    for (const auto* s : members) {
      kappas.push_back(s->kappa_est);
      ferrs.push_back(s->ferr);
      row.avg_ferr += s->ferr;
      row.avg_nbe += s->nbe;
      row.avg_outer_iters += s->outer_iters;
      row.avg_gmres_iters += s->gmres_iters;
    }
    const auto count = static_cast<double>(members.size());
    row.avg_ferr /= count;
    row.avg_nbe /= count;
    row.avg_outer_iters /= count;
    row.avg_gmres_iters /= count;
    row.median_ferr = median(ferrs);
    row.tau = tau_base * median(kappas);
    for (const auto* s : members)
      if (std::max(s->ferr, s->nbe) < row.tau) ++ok;
    if (with_xi) row.xi = static_cast<double>(ok) / count;
    out.ranges.push_back(row);
  }

  std::map<int, UsageRow> decades;
  for (const auto& s : systems) {
    const int d = condition_decade(s.kappa_est);
    auto& row = decades[d];
    row.decade = d;
    ++row.count;
    for (Format f : s.action.steps()) row.avg_count[static_cast<std::size_t>(f)] += 1.0;
  }
  for (auto& [d, row] : decades) {
    for (double& c : row.avg_count) c /= static_cast<double>(row.count);
    out.usage.push_back(row);
  }

  out.systems = std::move(systems);
  return out;
}

std::vector<SystemResult> run_policy(std::span<const ProblemInstance> systems, const Policy& policy,
                                     const EvalConfig& cfg) {
  cfg.stop.validate();
  std::vector<SystemResult> rows(systems.size());
  parallel_for(systems.size(), cfg.workers, [&](std::size_t i) {
    const auto& p = systems[i];
    const Context ctx = extract_context(p.a, cfg.condition);
    const auto [action, state] = policy(ctx);
    const SolveReport rep = solve_gmres_ir(p.a, p.b, action, cfg.stop, std::span<const double>(p.x_true));
    SystemResult& r = rows[i];
    r.id = p.id;
    r.n = p.a.rows();
    r.family = p.meta.family;
    r.kappa_est = ctx.kappa();
    r.norm_inf = norm_inf(p.a);
    r.state_index = state;
    r.action = action;
    r.status = rep.status;
    r.outer_iters = rep.outer_iters;
    r.gmres_iters = rep.gmres_iters_total;
    r.ferr = rep.ferr;
    r.nbe = rep.nbe;
    r.reward = total_reward(rep, ctx, cfg.weights, cfg.reward_options);
  });
  return rows;
}

EvalSummary evaluate(const QTable& q, std::span<const ProblemInstance> systems, const EvalConfig& cfg) {
  EvalConfig local = cfg;
  local.condition = q.condition;
  const Policy greedy = [&q](const Context& ctx) {
    const DiscreteState s = discretize(ctx, q.bins());
    return std::pair{q.space()[q.greedy(s.index)], std::optional<std::size_t>(s.index)};
  };
  return summarize("RL", run_policy(systems, greedy, local), cfg.tau_base, true);
}

EvalSummary evaluate(const QTable& q, const DatasetManifest& manifest, const EvalConfig& cfg) {
  const auto systems = load_all(manifest, cfg.workers);
  return evaluate(q, systems, cfg);
}

EvalSummary baseline_fp64(std::span<const ProblemInstance> systems, const EvalConfig& cfg) {
  const Policy fixed = [](const Context&) { return std::pair{kAllFp64, std::optional<std::size_t>()}; };
  return summarize("FP64", run_policy(systems, fixed, cfg), cfg.tau_base, false);
}

EvalSummary baseline_fp64(const DatasetManifest& manifest, const EvalConfig& cfg) {
  const auto systems = load_all(manifest, cfg.workers);
  return baseline_fp64(systems, cfg);
}

std::vector<ProblemInstance> load_all(const DatasetManifest& manifest, unsigned workers) {
  std::vector<ProblemInstance> out(manifest.instances.size());
  parallel_for(out.size(), workers, [&](std::size_t i) { out[i] = load_instance(manifest, manifest.instances[i]); });
  return out;
}

std::string systems_csv(const EvalSummary& s) {
  std::ostringstream out;
  out << kSystemsHeader << '\n';
  for (const auto& r : s.systems) {
    out << r.id << ',' << r.n << ',' << to_string(r.family) << ',' << format_double(r.kappa_est) << ','
        << format_double(r.norm_inf) << ',' << (r.state_index ? std::to_string(*r.state_index) : std::string())
        << ',' << to_string(r.action) << ',' << to_string(r.status) << ',' << r.outer_iters << ','
        << r.gmres_iters << ',' << format_double(r.ferr) << ',' << format_double(r.nbe) << ','
        << format_double(r.reward.total) << ',' << format_double(r.reward.f_precision) << ','
        << format_double(r.reward.f_accuracy) << ',' << format_double(r.reward.f_penalty) << '\n';
  }
  return out.str();
}

std::string summary_csv(std::span<const EvalSummary> summaries) {
  std::ostringstream out;
  out << kSummaryHeader << '\n';
  for (const auto& s : summaries) {
    for (const auto& r : s.ranges) {
      out << s.method << ',' << r.range << ',' << r.count << ',' << (r.xi ? format_double(*r.xi) : "--") << ','
          << format_double(r.avg_ferr) << ',' << format_double(r.avg_nbe) << ',' << format_double(r.avg_outer_iters)
          << ',' << format_double(r.avg_gmres_iters) << ',' << format_double(r.median_ferr) << ','
          << format_double(r.tau) << '\n';
    }
  }
  return out.str();
}

std::string usage_csv(std::span<const EvalSummary> summaries) {
  std::ostringstream out;
  out << kUsageHeader << '\n';
  for (const auto& s : summaries) {
    for (const auto& r : s.usage) {
      out << s.method << ',' << r.decade << ',' << r.count;
      for (double c : r.avg_count) out << ',' << format_double(c);
      out << '\n';
    }
  }
  return out.str();
}

std::string episodes_csv(std::span<const EpisodeLog> log) {
  std::ostringstream out;
  out << kEpisodesHeader << '\n';
  for (const auto& e : log)
    out << e.episode << ',' << format_double(e.mean_reward) << ',' << format_double(e.mean_abs_rpe) << ','
        << format_double(e.epsilon) << '\n';
  return out.str();
}

void report(std::span<const EvalSummary> summaries, std::span<const EpisodeLog> log,
            const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  if (!summaries.empty()) {
    write_text(out_dir / "summary.csv", summary_csv(summaries));
    write_text(out_dir / "usage.csv", usage_csv(summaries));
    for (const auto& s : summaries) write_text(out_dir / ("systems_" + slug(s.method) + ".csv"), systems_csv(s));
  }
  if (!log.empty()) write_text(out_dir / "episodes.csv", episodes_csv(log));
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace prectune
