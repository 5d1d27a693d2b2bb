#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "coopdock/scenarios.hpp"

namespace coopdock {

// Malformed or inconsistent scenario configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON scenario file (comments allowed). Missing keys fall back to the case
// study values; unknown keys are rejected. Angles are radians except
// vessels.*.alpha_deg. Does not check the docking reference, see validate().
ScenarioConfig parse_scenario_config(std::string_view json_text);
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

// Full JSON description; parse_scenario_config(to_json_text(c)) reproduces c.
std::string to_json_text(const ScenarioConfig& config);

}  // namespace coopdock
