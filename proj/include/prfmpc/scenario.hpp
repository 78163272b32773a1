#pragma once

#include <string>

#include <json.hpp>

#include "prfmpc/sim.hpp"

namespace prfmpc::cli {

/// The versioned default scenario embedded in the binary. Every configurable
/// field appears here; user files may override any subset and unknown fields
/// are rejected.
nlohmann::json default_scenario_json();

/// Merges a user document over the defaults (rejecting unknown keys
/// recursively) and converts to a trial configuration. Throws ConfigError on
/// any structural or range problem.
sim::TrialConfig config_from_json(const nlohmann::json& user);

/// Loads a scenario file; an empty path means the embedded defaults.
sim::TrialConfig load_scenario(const std::string& path);

/// Fully resolved configuration as JSON, suitable for echoing into
/// summary.json so a run is reproducible from its own output.
nlohmann::json resolved_json(const sim::TrialConfig& cfg);

}  // namespace prfmpc::cli
