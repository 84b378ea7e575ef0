#pragma once

// JSON (de)serialization of model, training and synthetic-data settings.
// Every field has a default; unknown keys are rejected so typos surface as
// configuration errors.

#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "vmr/synthetic_data.hpp"
#include "vmr/training.hpp"

namespace vmr {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json ablations_to_json(const Ablations& a);
/// Accepts a list of flag names.
Ablations ablations_from_json(const nlohmann::json& j);
std::string ablation_label(const Ablations& a);

nlohmann::json to_json(const TrainConfig& c);
/// Fields of TrainConfig and its ModelConfig share one flat object.
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& defaults = {});

nlohmann::json to_json(const SyntheticConfig& c);
SyntheticConfig synthetic_config_from_json(const nlohmann::json& j, const SyntheticConfig& defaults = {});

/// Throws ConfigError if `j` has keys outside `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where);

}  // namespace vmr
