#pragma once

// Internal: JSON-level entry points shared by config parsing and the CLI
// override path.

#include "json.hpp"

#include "rlattack/harness.hpp"

namespace rlattack {

nlohmann::json parse_json_text(const std::string& text);
ExperimentConfig parse_config_json(const nlohmann::json& root);

}  // namespace rlattack
