#pragma once

// JSON bindings for the configuration structs shared by manifests, Q-table
// runs and the command line. Reading layers the document over the current
// values: keys that are absent leave the field untouched, unknown keys throw.

#include "json.hpp"
#include "prectune/gmres_ir.hpp"
#include "prectune/harness.hpp"
#include "prectune/problems.hpp"
#include "prectune/reward.hpp"

namespace prectune {

void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);

void to_json(nlohmann::json& j, const StopConfig& c);
void from_json(const nlohmann::json& j, StopConfig& c);

void to_json(nlohmann::json& j, const RewardWeights& w);
void from_json(const nlohmann::json& j, RewardWeights& w);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);

/// Resolves a preset name or throws std::invalid_argument listing the valid ones.
RewardWeights weights_or_throw(const std::string& name);

}  // namespace prectune
