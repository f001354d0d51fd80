#include "prectune/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace prectune {

using nlohmann::json;

void EpsilonSchedule::validate() const {
  if (total_episodes < 1) throw std::invalid_argument("EpsilonSchedule: total episodes must be >= 1");
  if (!(eps_min >= 0.0 && eps_min <= 1.0)) throw std::invalid_argument("EpsilonSchedule: eps_min must lie in [0,1]");
}

double epsilon_at(int t, const EpsilonSchedule& sched) {
  return std::max(sched.eps_min, 1.0 - static_cast<double>(t) / static_cast<double>(sched.total_episodes));
}

QTable::QTable(BinSpec bins, ActionSpace space, double alpha)
    : bins_(bins),
      space_(std::move(space)),
      alpha_(alpha),
      values_(bins_.n_states() * space_.size(), 0.0),
      counts_(values_.size(), 0) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("QTable: alpha must lie in (0,1]");
  if (space_.size() == 0) throw std::invalid_argument("QTable: empty action space");
}

double QTable::update(std::size_t state, std::size_t action, double reward) {
  if (!std::isfinite(reward)) throw std::invalid_argument("QTable::update: reward must be finite");
  double& q = values_.at(state * n_actions() + action);
  const double delta = reward - q;
  q += alpha_ * delta;
  ++counts_[state * n_actions() + action];
  return delta;
}

std::size_t QTable::greedy(std::size_t state) const {
  const auto r = row(state);
  std::size_t best = 0;
  for (std::size_t a = 1; a < r.size(); ++a) {
    if (r[a] > r[best]) {
      best = a;
    } else if (r[a] == r[best] && action_cost_bits(space_[a]) < action_cost_bits(space_[best])) {
      best = a;
    }
  }
  return best;
}

std::size_t select_action(const QTable& q, const DiscreteState& s, double eps, Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < eps) {
    std::uniform_int_distribution<std::size_t> pick(0, q.n_actions() - 1);
    return pick(rng);
  }
  return q.greedy(s.index);
}

PrecisionAction infer(const QTable& q, const Context& ctx) {
  return q.space()[q.greedy(discretize(ctx, q.bins()).index)];
}

namespace {

json bins_to_json(const FeatureBins& b) { return {{"lo", b.lo}, {"hi", b.hi}, {"n", b.n_bins}}; }

FeatureBins bins_from_json(const json& j) {
  return {j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("n").get<std::size_t>()};
}

}  // namespace

std::string serialize_qtable(const QTable& q) {
  json actions = json::array();
  for (const auto& a : q.space().actions()) actions.push_back(to_string(a));
  json formats = json::array();
  for (Format f : q.space().formats()) formats.push_back(std::string(format_name(f)));

  json values = json::array();
  json counts = json::array();
  for (std::size_t s = 0; s < q.n_states(); ++s) {
    for (std::size_t a = 0; a < q.n_actions(); ++a) {
      values.push_back(q.value(s, a));
      counts.push_back(q.visits(s, a));
    }
  }

  json doc;
  doc["format_version"] = kQTableFormatVersion;
  doc["bins"] = {{"cond", bins_to_json(q.bins().cond)}, {"norm", bins_to_json(q.bins().norm)}};
  doc["formats"] = formats;
  doc["actions"] = actions;
  doc["subsample_fraction"] = q.space().subsample_fraction() ? json(*q.space().subsample_fraction()) : json(nullptr);
  doc["alpha"] = q.alpha();
  doc["gamma"] = q.gamma;
  doc["schedule"] = {{"episodes", q.schedule.total_episodes}, {"eps_min", q.schedule.eps_min}};
  doc["seed"] = q.seed;
  doc["tau_conv"] = q.tau_conv;
  doc["weights"] = q.weights_name;
  doc["condition"] = to_string(q.condition);
  doc["stop_rule"] = to_string(q.stop_rule);
  doc["n_states"] = q.n_states();
  doc["n_actions"] = q.n_actions();
  doc["values"] = values;
  doc["counts"] = counts;
  return doc.dump(1) + "\n";
}

QTable parse_qtable(const std::string& text) {
  using Kind = QTableLoadError::Kind;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw QTableLoadError(Kind::malformed, std::string("Q-table is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("format_version"))
      throw QTableLoadError(Kind::malformed, "Q-table is missing format_version");
    const int version = doc.at("format_version").get<int>();
    if (version != kQTableFormatVersion)
      throw QTableLoadError(Kind::version_mismatch, "Q-table format_version " + std::to_string(version) +
                                                        " is not supported (expected " +
                                                        std::to_string(kQTableFormatVersion) + ")");

    std::vector<Format> formats;
    for (const auto& name : doc.at("formats")) {
      const auto f = parse_format(name.get<std::string>());
      if (!f) throw QTableLoadError(Kind::unknown_format, "unknown format name '" + name.get<std::string>() + "'");
      formats.push_back(*f);
    }
    std::vector<PrecisionAction> actions;
    for (const auto& item : doc.at("actions")) {
      const auto a = parse_action(item.get<std::string>());
      if (!a) throw QTableLoadError(Kind::unknown_format, "unparseable action '" + item.get<std::string>() + "'");
      actions.push_back(*a);
    }
    std::optional<double> fraction;
    if (doc.contains("subsample_fraction") && !doc.at("subsample_fraction").is_null())
      fraction = doc.at("subsample_fraction").get<double>();

    const BinSpec bins{bins_from_json(doc.at("bins").at("cond")), bins_from_json(doc.at("bins").at("norm"))};
    QTable q(bins, ActionSpace(std::move(formats), std::move(actions), fraction), doc.at("alpha").get<double>());

    const auto n_states = doc.at("n_states").get<std::size_t>();
    const auto n_actions = doc.at("n_actions").get<std::size_t>();
    const auto& values = doc.at("values");
    const auto& counts = doc.at("counts");
    if (n_states != q.n_states() || n_actions != q.n_actions() || values.size() != q.values_.size() ||
        counts.size() != q.counts_.size())
      throw QTableLoadError(Kind::shape_mismatch, "Q-table dimensions disagree with bins/action list");
    for (std::size_t i = 0; i < values.size(); ++i) {
      q.values_[i] = values[i].get<double>();
      q.counts_[i] = counts[i].get<std::uint64_t>();
    }

    q.gamma = doc.value("gamma", 0.0);
    q.schedule.total_episodes = doc.at("schedule").at("episodes").get<int>();
    q.schedule.eps_min = doc.at("schedule").at("eps_min").get<double>();
    q.seed = doc.at("seed").get<std::uint64_t>();
    q.tau_conv = doc.at("tau_conv").get<double>();
    q.weights_name = doc.at("weights").get<std::string>();
    const auto cond = parse_condition_source(doc.value("condition", std::string("estimate")));
    if (!cond) throw QTableLoadError(Kind::malformed, "unknown condition source");
    q.condition = *cond;
    const auto rule = parse_stop_rule(doc.value("stop_rule", std::string("tolerance")));
    if (!rule) throw QTableLoadError(Kind::malformed, "unknown stop rule");
    q.stop_rule = *rule;
    return q;
  } catch (const json::exception& e) {
    throw QTableLoadError(Kind::malformed, std::string("Q-table field error: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw QTableLoadError(Kind::malformed, std::string("Q-table content error: ") + e.what());
  }
}

void save_qtable(const QTable& q, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write Q-table to " + path.string());
  out << serialize_qtable(q);
  if (!out) throw std::runtime_error("failed writing Q-table to " + path.string());
}

QTable load_qtable(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw QTableLoadError(QTableLoadError::Kind::io, "cannot open Q-table " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_qtable(buf.str());
}

}  // namespace prectune
