#pragma once

// Named end-to-end runs. Each writes its CSV/JSON artifacts into an output
// directory and returns a summary with pass/fail checks.

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvfl/config.hpp"

namespace cvfl {

struct Check {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double limit = 0.0;
    std::string detail;
};

struct ScenarioResult {
    std::string scenario;
    std::vector<Check> checks;
    nlohmann::json data;  ///< scenario-specific numbers

    bool passed() const;
};

const std::vector<std::string>& scenario_names();

/// Scenario-specific defaults; throws Error(configuration) for unknown names.
RunConfig scenario_defaults(const std::string& name);

/// Runs a scenario. `explicit_keys` lists keys set by the user, so derived
/// defaults (for example k = kappa / 2 in fig3) only apply when the key was
/// left unset. Artifacts and summary.json go to out_dir.
ScenarioResult run_scenario(const std::string& name, const RunConfig& cfg,
                            const std::set<std::string>& explicit_keys,
                            const std::string& out_dir);

}  // namespace cvfl
