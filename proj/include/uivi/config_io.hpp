#pragma once

#include <json.hpp>

#include "uivi/runner.hpp"

namespace uivi {

nlohmann::json to_json(const RunConfig& cfg);

// Overrides the fields present in `j`; unknown keys are a config error.
void apply_json(RunConfig& cfg, const nlohmann::json& j);

RunConfig load_config_file(const std::string& path, RunConfig base = {});

nlohmann::json to_json(const MetricsRecord& rec, bool include_wall_clock);

}  // namespace uivi
