#include "prectune/config_io.hpp"

#include <initializer_list>
#include <stdexcept>
#include <string_view>

namespace prectune {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::string_view what, std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " config must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("unknown " + std::string(what) + " config key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void read_stop_fields(const json& j, StopConfig& s) {
  read(j, "tau_conv", s.tau_conv);
  read(j, "stagnation", s.stagnation);
  read(j, "i_max", s.i_max);
  read(j, "gmres_rtol", s.gmres_rtol);
  read(j, "gmres_maxit", s.gmres_maxit);
  if (j.contains("stop_rule")) {
    const auto name = j.at("stop_rule").get<std::string>();
    const auto r = parse_stop_rule(name);
    if (!r) throw std::invalid_argument("unknown stop rule '" + name + "' (valid: tolerance, literal)");
    s.rule = *r;
  }
}

void write_stop_fields(json& j, const StopConfig& s) {
  j["tau_conv"] = s.tau_conv;
  j["stagnation"] = s.stagnation;
  j["i_max"] = s.i_max;
  j["gmres_rtol"] = s.gmres_rtol;
  j["gmres_maxit"] = s.gmres_maxit;
  j["stop_rule"] = std::string(to_string(s.rule));
}

ConditionSource read_condition(const json& j, ConditionSource current) {
  if (!j.contains("condition")) return current;
  const auto name = j.at("condition").get<std::string>();
  const auto c = parse_condition_source(name);
  if (!c) throw std::invalid_argument("unknown condition source '" + name + "' (valid: estimate, svd)");
  return *c;
}

}  // namespace

RewardWeights weights_or_throw(const std::string& name) {
  const auto w = weights_preset(name);
  if (!w) throw std::invalid_argument("unknown weights preset '" + name + "' (valid presets: W1, W2)");
  return *w;
}

void to_json(json& j, const DatasetConfig& c) {
  j = json{{"name", c.name},
           {"family", std::string(to_string(c.family))},
           {"n_train", c.n_train},
           {"n_test", c.n_test},
           {"n_min", c.n_min},
           {"n_max", c.n_max},
           {"kappa_min", c.kappa_min},
           {"kappa_max", c.kappa_max},
           {"sigma_max", c.sigma_max},
           {"lambda_s", c.lambda_s},
           {"beta", c.beta},
           {"seed", c.seed}};
}

void from_json(const json& j, DatasetConfig& c) {
  reject_unknown(j, "dataset",
                 {"name", "family", "n_train", "n_test", "n_min", "n_max", "kappa_min", "kappa_max", "sigma_max",
                  "lambda_s", "beta", "seed"});
  read(j, "name", c.name);
  if (j.contains("family")) {
    const auto name = j.at("family").get<std::string>();
    const auto f = parse_family(name);
    if (!f) throw std::invalid_argument("unknown family '" + name + "' (valid: dense, sparse)");
    c.family = *f;
  }
  read(j, "n_train", c.n_train);
  read(j, "n_test", c.n_test);
  read(j, "n_min", c.n_min);
  read(j, "n_max", c.n_max);
  read(j, "kappa_min", c.kappa_min);
  read(j, "kappa_max", c.kappa_max);
  read(j, "sigma_max", c.sigma_max);
  read(j, "lambda_s", c.lambda_s);
  read(j, "beta", c.beta);
  read(j, "seed", c.seed);
}

void to_json(json& j, const StopConfig& c) {
  j = json::object();
  write_stop_fields(j, c);
}

void from_json(const json& j, StopConfig& c) {
  reject_unknown(j, "stopping", {"tau_conv", "stagnation", "i_max", "gmres_rtol", "gmres_maxit", "stop_rule"});
  read_stop_fields(j, c);
}

void to_json(json& j, const RewardWeights& w) { j = json{{"w1", w.w1}, {"w2", w.w2}, {"w3", w.w3}}; }

void from_json(const json& j, RewardWeights& w) {
  reject_unknown(j, "weights", {"w1", "w2", "w3"});
  read(j, "w1", w.w1);
  read(j, "w2", w.w2);
  read(j, "w3", w.w3);
}

void to_json(json& j, const TrainConfig& c) {
  json formats = json::array();
  for (Format f : c.formats) formats.push_back(std::string(format_name(f)));
  j = json{{"episodes", c.episodes},
           {"alpha", c.alpha},
           {"eps_min", c.eps_min},
           {"weights", c.weights_name},
           {"literal_c2_sign", c.reward_options.literal_c2_sign},
           {"seed", c.seed},
           {"subsample_fraction", c.subsample_fraction ? json(*c.subsample_fraction) : json(nullptr)},
           {"gamma", c.gamma},
           {"n_cond_bins", c.n_cond_bins},
           {"n_norm_bins", c.n_norm_bins},
           {"condition", std::string(to_string(c.condition))},
           {"formats", formats}};
  write_stop_fields(j, c.stop);
}

void from_json(const json& j, TrainConfig& c) {
  reject_unknown(j, "train",
                 {"episodes", "alpha", "eps_min", "weights", "literal_c2_sign", "seed", "subsample_fraction", "gamma",
                  "n_cond_bins", "n_norm_bins", "condition", "formats", "tau_conv", "stagnation", "i_max",
                  "gmres_rtol", "gmres_maxit", "stop_rule"});
  read(j, "episodes", c.episodes);
  read(j, "alpha", c.alpha);
  read(j, "eps_min", c.eps_min);
  if (j.contains("weights")) {
    c.weights_name = j.at("weights").get<std::string>();
    c.weights = weights_or_throw(c.weights_name);
  }
  read(j, "literal_c2_sign", c.reward_options.literal_c2_sign);
  read(j, "seed", c.seed);
  if (j.contains("subsample_fraction")) {
    const auto& v = j.at("subsample_fraction");
    c.subsample_fraction = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  }
  read(j, "gamma", c.gamma);
  read(j, "n_cond_bins", c.n_cond_bins);
  read(j, "n_norm_bins", c.n_norm_bins);
  c.condition = read_condition(j, c.condition);
  if (j.contains("formats")) {
    c.formats.clear();
    for (const auto& item : j.at("formats")) {
      const auto name = item.get<std::string>();
      const auto f = parse_format(name);
      if (!f) throw std::invalid_argument("unknown format '" + name + "'");
      c.formats.push_back(*f);
    }
  }
  read_stop_fields(j, c.stop);
}

void to_json(json& j, const EvalConfig& c) {
  j = json{{"weights", c.weights_name},
           {"literal_c2_sign", c.reward_options.literal_c2_sign},
           {"tau_base", c.tau_base},
           {"condition", std::string(to_string(c.condition))},
           {"workers", c.workers}};
  write_stop_fields(j, c.stop);
}

void from_json(const json& j, EvalConfig& c) {
  reject_unknown(j, "eval",
                 {"weights", "literal_c2_sign", "tau_base", "condition", "workers", "tau_conv", "stagnation",
                  "i_max", "gmres_rtol", "gmres_maxit", "stop_rule"});
  if (j.contains("weights")) {
    c.weights_name = j.at("weights").get<std::string>();
    c.weights = weights_or_throw(c.weights_name);
  }
  read(j, "literal_c2_sign", c.reward_options.literal_c2_sign);
  read(j, "tau_base", c.tau_base);
  c.condition = read_condition(j, c.condition);
  read(j, "workers", c.workers);
  read_stop_fields(j, c.stop);
}

}  // namespace prectune
