#pragma once

#include <nlohmann/json.hpp>

#include "mhc/model.hpp"
#include "mhc/planner.hpp"
#include "mhc/random_matrix.hpp"
#include "mhc/train.hpp"

// JSON mapping of the configuration types. Readers start from defaults, accept
// only known keys, and throw ValidationError naming the offending field.
namespace mhc {

nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const TaskSpec& t);
nlohmann::json to_json(const TrainConfig& t);
nlohmann::json to_json(const ArchSpec& a);
nlohmann::json to_json(const SweepSpec& s);
nlohmann::json to_json(const GridSpec& g);

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig defaults = {});
TaskSpec task_spec_from_json(const nlohmann::json& j, TaskSpec defaults = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});
ArchSpec arch_spec_from_json(const nlohmann::json& j);
SweepSpec sweep_spec_from_json(const nlohmann::json& j);
GridSpec grid_spec_from_json(const nlohmann::json& j);

// Doubles for JSON output: NaN and infinities become null / "inf".
nlohmann::json number_or_flag(double v);

}  // namespace mhc
