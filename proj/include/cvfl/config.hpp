#pragma once

// Flat key = value run configuration. Lines are `key = value`; `#` starts a
// comment. Unknown keys and unparsable values are configuration errors.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cvfl/classical.hpp"
#include "cvfl/grid.hpp"
#include "cvfl/model.hpp"
#include "cvfl/moments.hpp"

namespace cvfl {

struct RunConfig {
    OscillatorParams osc;
    MeasurementParams meas;
    FeedbackConfig fb;

    std::uint64_t seed = 20240601;
    double dt = 0.0;     ///< 0: module default
    double t_end = 0.0;  ///< 0: scenario default
    std::size_t n_traj = 2000;

    MeanState initial{1.0, 0.0};
    CovState initial_cov{0.5, 0.5, 0.0};

    GridSpec grid = GridSpec::centered(256, 6.0);
    Advection advection = Advection::muscl;
    StochasticScheme stochastic = StochasticScheme::milstein;

    // Overdamped model (classical-equivalence); kappa, gamma and sigma are
    // shared with the oscillator keys.
    double temperature = 1.0;
    QuadraticPotential potential;

    unsigned workers = 1;

    OverdampedParams overdamped() const;
    nlohmann::json echo() const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines; errors name the offending line.
KeyValues parse_key_values(std::string_view text);
KeyValues read_config_file(const std::string& path);

/// Applies one setting. Throws Error(configuration) for unknown keys or
/// values that do not parse.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
void apply_settings(RunConfig& cfg, const KeyValues& kv);

const std::vector<std::string>& known_keys();

}  // namespace cvfl
