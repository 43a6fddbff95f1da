#pragma once

#include <string>

#include <json.hpp>

#include "fedad/models.hpp"

namespace fedad {

nlohmann::json model_config_to_json(const ModelConfig& c);

// Fields absent from `j` keep the values of `base`. Unknown keys and bad
// enums raise ConfigError mentioning `where` (a JSON path).
ModelConfig model_config_from_json(const nlohmann::json& j, const ModelConfig& base,
                                   const std::string& where);

}  // namespace fedad
