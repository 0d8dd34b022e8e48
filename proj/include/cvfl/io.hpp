#pragma once

// CSV and JSON emission. Every CSV has a one-line header and full double
// precision.

#include <string>
#include <vector>

#include <json.hpp>

#include "cvfl/grid.hpp"
#include "cvfl/integrators.hpp"
#include "cvfl/sde.hpp"
#include "cvfl/stability.hpp"

namespace cvfl {

/// Columns must share a length.
void write_columns(const std::string& path, const std::vector<std::string>& header,
                   const std::vector<const std::vector<double>*>& columns);

void write_mean_path(const std::string& path, const SampledPath<2>& p);       // t,x,p
void write_covariance_path(const std::string& path, const SampledPath<3>& p); // t,vx,vp,c
void write_trajectory(const std::string& path, const TrajectoryRecord& r);    // t,xc,pc,dI
void write_ensemble(const std::string& path, const EnsembleStats& s);
void write_field(const std::string& path, const GridField& f);                // x,p,w
void write_chart(const std::string& path, const std::vector<ChartCell>& cells);

/// Raw little-endian doubles, x-major, plus `<path>.json` with bounds,
/// spacing, shape and time.
void write_field_binary(const std::string& path, const GridField& f, double t);

void write_json(const std::string& path, const nlohmann::json& j);

/// JSON value for a double; non-finite values become strings.
nlohmann::json json_number(double v);

}  // namespace cvfl
